// Wire frames exchanged with the session server. One JSON object per
// WebSocket message; server-sent frames carry a per-recipient frame_seq
// (null on ephemeral frames like timers) used for resume-after-reconnect.

export interface BaseFrame {
  kind: string;
  frame_seq?: number | null;
}

export interface JoinedFrame extends BaseFrame {
  kind: "joined";
  participant_id: string;
  display_name: string;
  subgroup: string | null;
}

export interface RoundStartedFrame extends BaseFrame {
  kind: "round_started";
  round_index: number;
  question: {
    id: string;
    team_a: string;
    team_b: string;
    spread: number;
    round_duration: number;
  };
  options: { side: "A" | "B"; risk_points: number; scale_value: number }[];
  duration_s: number;
  prompt: string;
}

export interface TimerFrame extends BaseFrame {
  kind: "timer";
  remaining_s: number;
}

export interface ChatFrame extends BaseFrame {
  kind: "chat";
  author: string;
  text: string;
  subgroup: string;
  chat_seq: number;
}

export interface AgentFrame extends BaseFrame {
  kind: "agent";
  author: string;
  text: string;
  subgroup: string;
  insight_id: string;
}

export interface SnapshotFrame extends BaseFrame {
  kind: "snapshot";
  scope: "local" | "regional" | "global";
  profile: number[];
  mean: number;
}

export interface RoundResultFrame extends BaseFrame {
  kind: "round_result";
  round_index: number;
  wcf: number;
  pick: "A" | "B" | "none";
  risk: number | null;
  tossup: boolean;
}

export interface ErrorFrame extends BaseFrame {
  kind: "error";
  code: string;
}

export type ServerFrame =
  | JoinedFrame
  | RoundStartedFrame
  | TimerFrame
  | ChatFrame
  | AgentFrame
  | SnapshotFrame
  | RoundResultFrame
  | ErrorFrame;
