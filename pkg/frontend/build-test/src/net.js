// WebSocket channel with offline queueing and resume-from-seq reconnects.
// The WebSocket implementation is injectable so tests can run under node.
const OPEN = 1;
export class SessionChannel {
    constructor(opts) {
        this.socket = null;
        this.queue = [];
        this.closed = false;
        this.opts = opts;
    }
    connect() {
        const make = this.opts.makeSocket ??
            ((url) => new globalThis.WebSocket(url));
        const state = this.opts.state;
        state.status = "connecting";
        const socket = make(this.opts.url);
        this.socket = socket;
        socket.onopen = () => {
            state.status = "open";
            const hello = { kind: "hello" };
            if (this.opts.participantId)
                hello.participant_id = this.opts.participantId;
            if (state.lastFrameSeq >= 0)
                hello.resume_from = state.lastFrameSeq;
            socket.send(JSON.stringify(hello));
            // Flush anything typed while offline, in order.
            for (const payload of this.queue.splice(0)) {
                socket.send(payload);
            }
        };
        socket.onmessage = (ev) => {
            let frame;
            try {
                frame = JSON.parse(String(ev.data));
            }
            catch {
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
    sendChat(text) {
        this.opts.state.addLocalEcho(text);
        const payload = JSON.stringify({ kind: "chat", text });
        if (this.socket && this.socket.readyState === OPEN) {
            this.socket.send(payload);
        }
        else {
            this.queue.push(payload);
        }
    }
    close() {
        this.closed = true;
        this.socket?.close();
    }
}
