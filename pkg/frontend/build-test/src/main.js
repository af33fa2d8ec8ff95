// Browser entry point: participant view (chat + countdown + live support
// chart) and a minimal moderator panel talking to the management API.
import { chartSvg } from "./chart.js";
import { ClientViewState } from "./state.js";
import { SessionChannel } from "./net.js";
const $ = (sel) => {
    const el = document.querySelector(sel);
    if (!el)
        throw new Error(`missing element ${sel}`);
    return el;
};
function fmtClock(totalS) {
    if (totalS === null)
        return "-:--";
    const m = Math.floor(totalS / 60);
    const s = totalS % 60;
    return `${m}:${String(s).padStart(2, "0")}`;
}
function renderTranscript(state, root) {
    root.innerHTML = "";
    for (const entry of state.transcript) {
        const div = document.createElement("div");
        div.className = entry.isAgent ? "msg agent" : entry.own ? "msg own" : "msg";
        const who = document.createElement("span");
        who.className = "author";
        who.textContent = entry.authorLabel;
        const body = document.createElement("span");
        body.className = "body";
        body.textContent = entry.text;
        div.append(who, body);
        if (entry.isAgent && entry.insightId) {
            const badge = document.createElement("span");
            badge.className = "insight-badge";
            badge.title = entry.insightId;
            badge.textContent = "insight";
            div.append(badge);
        }
        if (entry.pending) {
            const pending = document.createElement("span");
            pending.className = "pending";
            pending.textContent = "sending…";
            div.append(pending);
        }
        root.append(div);
    }
    root.scrollTop = root.scrollHeight;
}
function renderAll(state) {
    $("#status").textContent = state.status;
    $("#who").textContent = state.displayName
        ? `${state.displayName} · ${state.subgroup ?? "unassigned"}`
        : "not joined";
    $("#timer").textContent = fmtClock(state.remainingS);
    const banner = $("#banner");
    banner.textContent = state.errorBanner ?? "";
    banner.style.display = state.errorBanner ? "block" : "none";
    const roundEl = $("#round");
    if (state.round) {
        roundEl.textContent = `${state.round.teamA} vs ${state.round.teamB} (spread ${state.round.spread})`;
        $("#prompt").textContent = state.round.prompt;
    }
    renderTranscript(state, $("#transcript"));
    const chartEl = $("#chart");
    if (state.chart) {
        chartEl.innerHTML = chartSvg(state.chart);
        $("#scope").textContent = `scope: ${state.chart.scopeLabel}`;
    }
    const results = $("#results");
    results.innerHTML = "";
    for (const r of state.results) {
        const li = document.createElement("li");
        li.textContent = r.tossup
            ? `round ${r.index + 1}: no forecast (wcf ${r.wcf.toFixed(3)})`
            : `round ${r.index + 1}: pick ${r.pick}, risk ${r.risk} (wcf ${r.wcf.toFixed(3)})`;
        results.append(li);
    }
}
function participantApp() {
    const state = new ClientViewState();
    let channel = null;
    const rerender = () => renderAll(state);
    setInterval(rerender, 250);
    $("#join-form").addEventListener("submit", (ev) => {
        ev.preventDefault();
        const sid = $("#session-id").value.trim();
        if (!sid)
            return;
        const proto = location.protocol === "https:" ? "wss" : "ws";
        channel?.close();
        channel = new SessionChannel({
            url: `${proto}://${location.host}/ws/${sid}`,
            state,
        });
        channel.connect();
    });
    $("#chat-form").addEventListener("submit", (ev) => {
        ev.preventDefault();
        const input = $("#chat-input");
        const text = input.value.trim();
        if (!text || !channel)
            return;
        channel.sendChat(text);
        input.value = "";
        rerender();
    });
}
async function api(path, body) {
    const resp = await fetch(path, {
        method: body === undefined ? "GET" : "POST",
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await resp.json().catch(() => ({}));
    if (!resp.ok) {
        throw new Error(doc.error ? `${doc.error}: ${doc.detail ?? ""}` : `HTTP ${resp.status}`);
    }
    return doc;
}
function moderatorPanel() {
    const out = $("#mod-output");
    const say = (text) => {
        out.textContent = text;
    };
    $("#mod-create").addEventListener("click", async () => {
        try {
            const payload = JSON.parse($("#mod-config").value);
            const doc = await api("/api/sessions", payload);
            $("#mod-session").value = doc.session_id;
            say(`created session ${doc.session_id}`);
        }
        catch (err) {
            say(String(err));
        }
    });
    $("#mod-add-question").addEventListener("click", async () => {
        try {
            const sid = $("#mod-session").value.trim();
            const fixture = JSON.parse($("#mod-fixture").value);
            const doc = await api(`/api/sessions/${sid}/questions`, fixture);
            say(`fixture loaded; ${doc.n_questions} questions pending`);
        }
        catch (err) {
            say(String(err));
        }
    });
    $("#mod-start").addEventListener("click", async () => {
        try {
            const sid = $("#mod-session").value.trim();
            const index = Number($("#mod-round").value);
            const doc = await api(`/api/sessions/${sid}/rounds/${index}/start`, {});
            say(`round ${index} started (${doc.question_id})`);
        }
        catch (err) {
            say(String(err));
        }
    });
    $("#mod-status").addEventListener("click", async () => {
        try {
            const sid = $("#mod-session").value.trim();
            const doc = await api(`/api/sessions/${sid}`);
            const lines = [
                `state: ${doc.state}; participants: ${doc.n_participants}; ` +
                    `rounds played: ${doc.rounds_played}/${doc.n_questions}`,
            ];
            for (const [i, f] of doc.forecasts.entries()) {
                lines.push(f.is_tossup
                    ? `  round ${i + 1}: no forecast (wcf ${f.wcf.toFixed(3)})`
                    : `  round ${i + 1}: pick ${f.pick}, risk ${f.risk_points} (wcf ${f.wcf.toFixed(3)})`);
            }
            say(lines.join("\n"));
        }
        catch (err) {
            say(String(err));
        }
    });
}
if (typeof document !== "undefined") {
    participantApp();
    moderatorPanel();
}
