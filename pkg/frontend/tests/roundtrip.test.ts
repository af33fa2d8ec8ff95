// Live round trip: spawn the session server, join four clients through the
// real client stack (channel + state), and check that a chat message lands
// only inside the sender's subgroup view.

import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import { spawn, type ChildProcess } from "node:child_process";

import wsModule from "ws";

import { ClientViewState } from "../src/state.js";
import { SessionChannel } from "../src/net.js";

const PORT = 18_430 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const WS_BASE = `ws://127.0.0.1:${PORT}`;
const WsImpl = (wsModule as any).WebSocket ?? wsModule;

let server: ChildProcess;
const channels: SessionChannel[] = [];

async function waitFor(check: () => boolean, what: string, timeoutMs = 15_000) {
  const deadline = Date.now() + timeoutMs;
  while (!check()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

async function serverReady() {
  const deadline = Date.now() + 15_000;
  while (true) {
    try {
      const resp = await fetch(`${BASE}/api/sessions/none`);
      if (resp.status === 404) return;
    } catch {
      /* not listening yet */
    }
    if (Date.now() > deadline) throw new Error("server never came up");
    await new Promise((r) => setTimeout(r, 100));
  }
}

before(async () => {
  server = spawn(
    "python3",
    ["-m", "confab.cli", "serve", "--port", String(PORT)],
    { stdio: ["ignore", "pipe", "pipe"] }
  );
  await serverReady();
});

after(() => {
  for (const ch of channels) ch.close();
  server.kill("SIGTERM");
});

test("chat round-trips and stays inside the sender's subgroup view", async () => {
  const resp = await fetch(`${BASE}/api/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      questions: [
        { id: "g1", team_a: "Sharks", team_b: "Coyotes", spread: 4.5, round_duration: 3 },
      ],
      target_subgroup_size: 2,
      snapshot_interval_ms: 500,
      agent_min_gap_ms: 400,
      seed: 5,
    }),
  });
  assert.equal(resp.status, 200);
  const sid = (await resp.json()).session_id as string;

  const clients = ["p1", "p2", "p3", "p4"].map((pid) => {
    const state = new ClientViewState();
    const channel = new SessionChannel({
      url: `${WS_BASE}/ws/${sid}`,
      participantId: pid,
      state,
      makeSocket: (url) => new WsImpl(url),
    });
    channels.push(channel);
    channel.connect();
    return { pid, state, channel };
  });

  await waitFor(
    () => clients.every((c) => c.state.displayName !== null),
    "all clients joined"
  );

  const start = await fetch(`${BASE}/api/sessions/${sid}/rounds/0/start`, {
    method: "POST",
  });
  assert.equal(start.status, 200);
  await waitFor(
    () => clients.every((c) => c.state.subgroup !== null && c.state.round !== null),
    "partition + round start delivered"
  );

  const sender = clients[0];
  const peers = clients.filter(
    (c) => c !== sender && c.state.subgroup === sender.state.subgroup
  );
  const outsiders = clients.filter(
    (c) => c.state.subgroup !== sender.state.subgroup
  );
  assert.equal(peers.length, 1);
  assert.equal(outsiders.length, 2);

  const text = "[pick:A][conf:0.9] sharks defense travels";
  sender.channel.sendChat(text);
  assert.equal(
    sender.state.transcript.filter((t) => t.own && t.text === text).length,
    1,
    "optimistic echo shows immediately"
  );

  await waitFor(
    () => sender.state.transcript.some((t) => t.text === text && !t.pending),
    "echo acknowledged"
  );
  await waitFor(
    () => peers[0].state.transcript.some((t) => t.text === text),
    "subgroup peer received the chat"
  );

  // Give routing a moment, then check isolation properties.
  await waitFor(
    () => clients.every((c) => c.state.results.length === 1),
    "round result delivered to everyone"
  );
  for (const c of outsiders) {
    assert.ok(
      !c.state.transcript.some((t) => !t.isAgent && t.text === text),
      `outsider ${c.pid} must not see the raw chat`
    );
  }
  // If the insight crossed subgroups it arrived as a styled agent frame.
  for (const c of clients) {
    for (const entry of c.state.transcript) {
      if (entry.isAgent) {
        assert.ok(entry.insightId, "agent messages carry the insight badge");
      }
    }
  }

  const result = clients[0].state.results[0];
  assert.ok(["A", "B", "none"].includes(result.pick));
});
