// Wire frames exchanged with the session server. One JSON object per
// WebSocket message; server-sent frames carry a per-recipient frame_seq
// (null on ephemeral frames like timers) used for resume-after-reconnect.
export {};
