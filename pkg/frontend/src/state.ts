// Client view state: a reducer over server frames plus optimistic local
// echoes. Frame handling is strictly in received order; anything that does
// not belong in this participant's view (cross-subgroup chat, stale frame
// seqs, malformed snapshots) is dropped and surfaced as an error banner
// where that matters.

import { renderProfile, type ChartSpec } from "./chart.js";
import type { ServerFrame, SnapshotFrame } from "./frames.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface TranscriptEntry {
  author: string;
  authorLabel: string;
  text: string;
  isAgent: boolean;
  insightId: string | null;
  own: boolean;
  pending: boolean; // local echo not yet acknowledged by the server
  chatSeq: number | null;
}

export interface RoundInfo {
  index: number;
  teamA: string;
  teamB: string;
  spread: number;
  prompt: string;
  durationS: number;
}

export interface RoundResult {
  index: number;
  wcf: number;
  pick: "A" | "B" | "none";
  risk: number | null;
  tossup: boolean;
}

export class ClientViewState {
  status: ConnectionStatus = "connecting";
  participantId: string | null = null;
  displayName: string | null = null;
  subgroup: string | null = null;
  transcript: TranscriptEntry[] = [];
  round: RoundInfo | null = null;
  remainingS: number | null = null;
  chart: ChartSpec | null = null;
  latestSnapshot: SnapshotFrame | null = null;
  results: RoundResult[] = [];
  errorBanner: string | null = null;
  lastFrameSeq = -1;

  apply(frame: ServerFrame): void {
    const seq = frame.frame_seq;
    if (typeof seq === "number") {
      if (seq <= this.lastFrameSeq) {
        return; // duplicate or replayed frame
      }
      this.lastFrameSeq = seq;
    }
    switch (frame.kind) {
      case "joined":
        this.participantId = frame.participant_id;
        this.displayName = frame.display_name;
        if (frame.subgroup) {
          this.subgroup = frame.subgroup;
        }
        break;
      case "round_started":
        this.round = {
          index: frame.round_index,
          teamA: frame.question.team_a,
          teamB: frame.question.team_b,
          spread: frame.question.spread,
          prompt: frame.prompt,
          durationS: frame.duration_s,
        };
        this.remainingS = frame.duration_s;
        this.chart = null;
        this.latestSnapshot = null;
        break;
      case "timer":
        this.remainingS = frame.remaining_s;
        break;
      case "chat": {
        if (this.subgroup !== null && frame.subgroup !== this.subgroup) {
          // Never display cross-subgroup chat; only agent frames may carry
          // content sourced elsewhere.
          return;
        }
        if (frame.author === this.participantId && this.reconcileEcho(frame.text, frame.chat_seq)) {
          return;
        }
        this.transcript.push({
          author: frame.author,
          authorLabel: frame.author === this.participantId ? "you" : frame.author,
          text: frame.text,
          isAgent: false,
          insightId: null,
          own: frame.author === this.participantId,
          pending: false,
          chatSeq: frame.chat_seq,
        });
        break;
      }
      case "agent":
        if (this.subgroup !== null && frame.subgroup !== this.subgroup) {
          return;
        }
        this.transcript.push({
          author: frame.author,
          authorLabel: "surrogate",
          text: frame.text,
          isAgent: true,
          insightId: frame.insight_id,
          own: false,
          pending: false,
          chatSeq: null,
        });
        break;
      case "snapshot":
        try {
          this.chart = renderProfile(frame);
          this.latestSnapshot = frame;
          this.errorBanner = null;
        } catch (err) {
          // Keep the prior chart on a malformed frame; just surface the fault.
          this.errorBanner = err instanceof Error ? err.message : String(err);
        }
        break;
      case "round_result":
        this.results.push({
          index: frame.round_index,
          wcf: frame.wcf,
          pick: frame.pick,
          risk: frame.risk,
          tossup: frame.tossup,
        });
        this.remainingS = 0;
        break;
      case "error":
        this.errorBanner = frame.code;
        break;
    }
  }

  // Optimistic UI: record the message immediately, marked "sending".
  addLocalEcho(text: string): TranscriptEntry {
    const entry: TranscriptEntry = {
      author: this.participantId ?? "me",
      authorLabel: "you",
      text,
      isAgent: false,
      insightId: null,
      own: true,
      pending: true,
      chatSeq: null,
    };
    this.transcript.push(entry);
    return entry;
  }

  private reconcileEcho(text: string, chatSeq: number): boolean {
    const pending = this.transcript.find(
      (e) => e.pending && e.own && e.text === text
    );
    if (pending) {
      pending.pending = false;
      pending.chatSeq = chatSeq;
      return true;
    }
    return false;
  }
}
