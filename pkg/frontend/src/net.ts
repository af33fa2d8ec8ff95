// WebSocket channel with offline queueing and resume-from-seq reconnects.
// The WebSocket implementation is injectable so tests can run under node.

import type { ClientViewState } from "./state.js";
import type { ServerFrame } from "./frames.js";

type WebSocketLike = {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
};

export type WebSocketFactory = (url: string) => WebSocketLike;

const OPEN = 1;

export interface ChannelOptions {
  url: string;
  participantId?: string;
  state: ClientViewState;
  makeSocket?: WebSocketFactory;
  reconnectDelayMs?: number;
  onFrame?: (frame: ServerFrame) => void;
}

export class SessionChannel {
  private readonly opts: ChannelOptions;
  private socket: WebSocketLike | null = null;
  private queue: string[] = [];
  private closed = false;

  constructor(opts: ChannelOptions) {
    this.opts = opts;
  }

  connect(): void {
    const make =
      this.opts.makeSocket ??
      ((url: string) => new (globalThis as any).WebSocket(url) as WebSocketLike);
    const state = this.opts.state;
    state.status = "connecting";
    const socket = make(this.opts.url);
    this.socket = socket;

    socket.onopen = () => {
      state.status = "open";
      const hello: Record<string, unknown> = { kind: "hello" };
      if (this.opts.participantId) hello.participant_id = this.opts.participantId;
      if (state.lastFrameSeq >= 0) hello.resume_from = state.lastFrameSeq;
      socket.send(JSON.stringify(hello));
      // Flush anything typed while offline, in order.
      for (const payload of this.queue.splice(0)) {
        socket.send(payload);
      }
    };
    socket.onmessage = (ev) => {
      let frame: ServerFrame;
      try {
        frame = JSON.parse(String(ev.data));
      } catch {
        return;
      }
      state.apply(frame);
      this.opts.onFrame?.(frame);
    };
    socket.onclose = () => {
      state.status = "closed";
      if (!this.closed) {
        setTimeout(() => this.connect(), this.opts.reconnectDelayMs ?? 1500);
      }
    };
    socket.onerror = () => {
      /* onclose follows */
    };
  }

  // Optimistic send: the message shows as "sending" until the server's own
  // chat frame comes back and reconciles it by text.
  sendChat(text: string): void {
    this.opts.state.addLocalEcho(text);
    const payload = JSON.stringify({ kind: "chat", text });
    if (this.socket && this.socket.readyState === OPEN) {
      this.socket.send(payload);
    } else {
      this.queue.push(payload);
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
