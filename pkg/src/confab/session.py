"""Session core: joins, partitioning, timed rounds, chat, agent/DME/sentiment ticks.

The engine is synchronous and clock-free: every command carries the caller's
time in ms, and tick() catches up on any snapshot boundaries that have come
due. Live transports call it from a real clock; the sim harness drives it
from a virtual one. Given the same config, seed, and command stream, two runs
emit byte-identical event logs.

All commands for one session must arrive through a single logical executor
(the engine has no internal locking); separate sessions are independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import agents as surrogate
from .analyzer import (
    BackendUnavailable,
    MockAnalyzer,
    SupportVector,
    smooth_update,
    stance_to_support,
)
from .domain import (
    ChatMessage,
    ForecastQuestion,
    Participant,
    Thinktank,
    partition_participants,
    question_from_fixture,
    validate_question,
)
from .events import EventLog, EventRecord
from .forecast import CollectiveForecast, finalize
from .matching import MatchingEngine
from .sentiment import (
    SCOPE_GLOBAL,
    SCOPE_LOCAL,
    ScopeSchedule,
    SentimentSeries,
    aggregate,
    region_of,
    scope_at,
    weighted_mean,
)


class SessionError(RuntimeError):
    pass


class InvalidConfig(SessionError):
    pass


class RoundInProgress(SessionError):
    pass


class NotInRound(SessionError):
    pass


class UnknownParticipant(SessionError):
    pass


class EmptyText(SessionError):
    pass


STATE_LOBBY = "lobby"
STATE_ROUND = "round_active"
STATE_BETWEEN = "between_rounds"
STATE_ENDED = "ended"


@dataclass
class SessionConfig:
    questions: list[ForecastQuestion]
    target_subgroup_size: int = 5
    snapshot_interval_ms: int = 5_000
    agent_min_gap_ms: int = 25_000
    scope: ScopeSchedule = field(default_factory=ScopeSchedule)
    smoothing_alpha: float = 0.5
    assessment_window: int = 10
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if not self.questions:
            problems.append("at least one question is required")
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            problems.append("duplicate question ids")
        for q in self.questions:
            for violation in validate_question(q):
                problems.append(f"question {q.id!r}: {violation}")
        if self.target_subgroup_size < 2:
            problems.append("target_subgroup_size must be >= 2")
        if self.snapshot_interval_ms <= 0:
            problems.append("snapshot_interval_ms must be positive")
        if self.agent_min_gap_ms < 0:
            problems.append("agent_min_gap_ms must be nonnegative")
        if not 0.0 < self.smoothing_alpha <= 1.0:
            problems.append("smoothing_alpha must be in (0, 1]")
        if self.assessment_window < 1:
            problems.append("assessment_window must be >= 1")
        if problems:
            raise InvalidConfig("; ".join(problems))

    def to_payload(self) -> dict:
        return {
            "questions": [q.to_fixture() for q in self.questions],
            "target_subgroup_size": self.target_subgroup_size,
            "snapshot_interval_ms": self.snapshot_interval_ms,
            "agent_min_gap_ms": self.agent_min_gap_ms,
            "scope": {
                "local_until": self.scope.local_until,
                "regional_until": self.scope.regional_until,
            },
            "smoothing_alpha": self.smoothing_alpha,
            "assessment_window": self.assessment_window,
            "seed": self.seed,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "SessionConfig":
        scope = doc.get("scope", {})
        return cls(
            questions=[question_from_fixture(q) for q in doc.get("questions", [])],
            target_subgroup_size=doc.get("target_subgroup_size", 5),
            snapshot_interval_ms=doc.get("snapshot_interval_ms", 5_000),
            agent_min_gap_ms=doc.get("agent_min_gap_ms", 25_000),
            scope=ScopeSchedule(
                local_until=scope.get("local_until", 0.4),
                regional_until=scope.get("regional_until", 0.7),
            ),
            smoothing_alpha=doc.get("smoothing_alpha", 0.5),
            assessment_window=doc.get("assessment_window", 10),
            seed=doc.get("seed", 0),
        )


def moderator_prompt(q: ForecastQuestion) -> str:
    """Round-opening text shown to every participant."""
    if q.spread > 0:
        line = f"{q.team_a} favored by {abs(q.spread):g}"
    elif q.spread < 0:
        line = f"{q.team_b} favored by {abs(q.spread):g}"
    else:
        line = "pick'em (no favorite)"
    return (
        f"Tonight: {q.team_a} vs {q.team_b} - spread: {line}. "
        f"Which team is more likely to beat the spread, and should we risk 10 or "
        f"20 points on it? Back your view with reasons, and say so when you agree "
        f"or disagree with others."
    )


class SessionEngine:
    """Deterministic single-session orchestrator over an append-only event log."""

    def __init__(
        self,
        config: SessionConfig,
        analyzer=None,
        session_id: str = "session",
        now_ms: int = 0,
    ) -> None:
        config.validate()
        self.config = config
        self.session_id = session_id
        self.analyzer = analyzer if analyzer is not None else MockAnalyzer()
        self._origin_ms = now_ms

        self.log = EventLog()
        self.state = STATE_LOBBY
        self.participants: dict[str, Participant] = {}
        self.subgroups: list[Thinktank] = []
        self._subgroup_of: dict[str, str] = {}
        self._agents: dict[str, surrogate.AgentState] = {}

        # Per-subgroup transcript; seq k lives at index k-1 and never resets.
        self._messages: dict[str, list[ChatMessage]] = {}
        # Round-scoped analyzer windows, keyed by participant.
        self._windows: dict[str, list[ChatMessage]] = {}
        self._stance_seq: dict[str, int] = {}
        self.support: dict[str, SupportVector] = {}

        self.matching = MatchingEngine()
        self.matching_by_round: dict[int, MatchingEngine] = {}
        self.series_by_round: dict[int, SentimentSeries] = {}
        self.forecasts: list[CollectiveForecast] = []

        self.round_index: int | None = None
        self._round_start_t = 0
        self._round_end_t = 0
        self._next_snapshot_t = 0

        self._emit(
            "session_created",
            self._t(now_ms),
            {"session_id": session_id, "config": config.to_payload()},
        )

    # -- time & log plumbing ------------------------------------------------

    def _t(self, now_ms: int) -> int:
        """Session-relative ms, clamped so recorded time never runs backwards."""
        t = now_ms - self._origin_ms
        if self.log.records:
            t = max(t, self.log.records[-1].time_ms)
        return t

    def _emit(self, kind: str, t: int, payload: dict) -> EventRecord:
        return self.log.append(kind, t, payload)

    @property
    def next_event_seq(self) -> int:
        return len(self.log.records)

    def events_since(self, seq: int) -> list[EventRecord]:
        return self.log.records[seq:]

    def export_events(self) -> list[EventRecord]:
        return list(self.log.records)

    def export_jsonl(self) -> str:
        return self.log.to_jsonl()

    # -- lifecycle ------------------------------------------------------------

    def join(self, participant_id: str, display_name: str | None = None, now_ms: int = 0) -> Participant:
        if self.state != STATE_LOBBY:
            raise SessionError("joins are closed once the first round starts")
        if not participant_id:
            raise UnknownParticipant("participant id must be non-empty")
        if participant_id in self.participants:
            return self.participants[participant_id]
        p = Participant(
            id=participant_id,
            display_name=display_name or f"Fan {len(self.participants) + 1}",
        )
        self.participants[participant_id] = p
        self._emit(
            "participant_joined",
            self._t(now_ms),
            {"participant_id": p.id, "display_name": p.display_name},
        )
        return p

    def start_round(self, index: int, now_ms: int) -> ForecastQuestion:
        if self.state == STATE_ROUND:
            raise RoundInProgress(f"round {self.round_index} is still running")
        if self.state == STATE_ENDED:
            raise SessionError("session has ended")
        if index != len(self.forecasts):
            raise SessionError(
                f"rounds run in order: expected round {len(self.forecasts)}, got {index}"
            )
        if index >= len(self.config.questions):
            raise SessionError(f"no question at index {index}")
        t = self._t(now_ms)

        if not self.subgroups:
            self._assign_partition(t)

        q = self.config.questions[index]
        self.round_index = index
        self._round_start_t = t
        self._round_end_t = t + q.round_duration * 1000
        self._next_snapshot_t = t + self.config.snapshot_interval_ms

        # Fresh opinion state per question; transcripts and seqs carry on.
        self.matching = MatchingEngine()
        self.matching_by_round[index] = self.matching
        self.series_by_round[index] = SentimentSeries()
        for pid in self.participants:
            self.support[pid] = SupportVector.uniform()
            self._windows[pid] = []
            self._stance_seq[pid] = 0
        for tt in self.subgroups:
            agent = self._agents[tt.id]
            agent.last_expression_time = None
            agent.observed_through_seq = len(self._messages[tt.id])

        self.state = STATE_ROUND
        self._emit(
            "round_started",
            t,
            {
                "round_index": index,
                "question": q.to_fixture(),
                "options": [
                    {"side": o.side, "risk_points": o.risk_points, "scale_value": o.scale_value}
                    for o in q.options
                ],
                "duration_s": q.round_duration,
                "prompt": moderator_prompt(q),
            },
        )
        return q

    def _assign_partition(self, t: int) -> None:
        self.subgroups = partition_participants(
            list(self.participants),
            target_size=self.config.target_subgroup_size,
            seed=self.config.seed,
        )
        for tt in self.subgroups:
            self._messages[tt.id] = []
            self._agents[tt.id] = surrogate.AgentState(
                subgroup_id=tt.id, surrogate_id=tt.surrogate_id
            )
            for pid in tt.member_ids:
                self._subgroup_of[pid] = tt.id
                self.participants[pid].subgroup_id = tt.id
        self._emit(
            "partition_assigned",
            t,
            {
                "subgroups": [
                    {"id": tt.id, "member_ids": tt.member_ids, "surrogate_id": tt.surrogate_id}
                    for tt in self.subgroups
                ]
            },
        )

    def ingest_chat(
        self,
        participant_id: str,
        text: str,
        now_ms: int,
        client_time_ms: int | None = None,
    ) -> int:
        if self.state != STATE_ROUND:
            raise NotInRound("no round is active")
        p = self.participants.get(participant_id)
        if p is None:
            raise UnknownParticipant(f"unknown participant {participant_id!r}")
        if not text or not text.strip():
            raise EmptyText("chat text is empty")
        t = self._t(now_ms)

        subgroup_id = self._subgroup_of[participant_id]
        history = self._messages[subgroup_id]
        msg = ChatMessage(
            seq=len(history) + 1,
            timestamp=t,
            author=participant_id,
            subgroup_id=subgroup_id,
            text=text,
        )
        history.append(msg)
        self._emit(
            "chat",
            t,
            {
                "subgroup_id": subgroup_id,
                "seq": msg.seq,
                "author": participant_id,
                "text": text,
                "client_time_ms": client_time_ms,
            },
        )

        window = self._windows[participant_id]
        window.append(msg)
        del window[: -self.config.assessment_window]
        self._apply_assessment(participant_id, subgroup_id, t)
        return msg.seq

    def _apply_assessment(self, participant_id: str, subgroup_id: str, t: int) -> None:
        q = self.config.questions[self.round_index]
        try:
            stance = self.analyzer.assess(self._windows[participant_id], q)
        except BackendUnavailable:
            return  # keep the prior stance
        if stance.as_of_seq <= self._stance_seq[participant_id]:
            return  # stale result: a fresher assessment already applied
        self._stance_seq[participant_id] = stance.as_of_seq
        updated = smooth_update(
            self.support[participant_id],
            stance_to_support(stance),
            self.config.smoothing_alpha,
        )
        self.support[participant_id] = updated
        self._emit(
            "stance_assessed",
            t,
            {
                "participant_id": participant_id,
                "subgroup_id": subgroup_id,
                "side": stance.side,
                "conviction": stance.conviction,
                "reasons": list(stance.reasons),
                "as_of_seq": stance.as_of_seq,
                "support": updated.as_list(),
            },
        )

    def tick(self, now_ms: int) -> list[EventRecord]:
        """Catch up on due snapshot boundaries, then finalize if time is up."""
        if self.state != STATE_ROUND:
            return []
        mark = self.next_event_seq
        t = now_ms - self._origin_ms
        while self._next_snapshot_t <= t and self._next_snapshot_t < self._round_end_t:
            self._snapshot_tick(self._next_snapshot_t)
            self._next_snapshot_t += self.config.snapshot_interval_ms
        if t >= self._round_end_t:
            self._finalize_round(self._round_end_t)
        return self.events_since(mark)

    def _snapshot_tick(self, ts: int) -> None:
        ts = self._t(ts + self._origin_ms)
        q = self.config.questions[self.round_index]

        # Agents sweep their local transcripts and register fresh insights.
        for tt in self.subgroups:
            agent = self._agents[tt.id]
            fresh = self._messages[tt.id][agent.observed_through_seq :]
            for insight in surrogate.observe(agent, fresh, q):
                before = len(self.matching.registry)
                index = self.matching.register_insight(insight)
                entry = self.matching.registry[index]
                self._emit(
                    "insight_registered",
                    ts,
                    {
                        "index": index,
                        "new": len(self.matching.registry) > before,
                        "raise_count": entry.raise_count,
                        "insight": {
                            "id": entry.insight.id,
                            "side": insight.side,
                            "reasons": list(insight.reasons),
                            "conviction": insight.conviction,
                            "origin_subgroup": insight.origin_subgroup,
                            "canonical_key": insight.canonical_key,
                        },
                    },
                )

        prevailing = {
            tt.id: weighted_mean(aggregate([self.support[pid] for pid in tt.member_ids]))
            for tt in self.subgroups
        }

        # Route at most one novel, maximally challenging insight per subgroup.
        for g_index, tt in enumerate(self.subgroups):
            agent = self._agents[tt.id]
            if not surrogate.pace_gate(agent, ts, self.config.agent_min_gap_ms):
                continue
            chosen = self.matching.select_for(tt.id, prevailing[tt.id])
            if chosen is None:
                continue
            self.matching.mark_exposed(tt.id, chosen)
            template_seed = self.config.seed + 7 * agent.expressions + g_index
            history = self._messages[tt.id]
            msg = surrogate.express(
                agent, chosen, q, template_seed, seq=len(history) + 1, now_ms=ts
            )
            history.append(msg)
            agent.observed_through_seq = max(agent.observed_through_seq, msg.seq)
            self._emit(
                "insight_routed",
                ts,
                {
                    "subgroup_id": tt.id,
                    "insight_id": chosen.id,
                    "canonical_key": chosen.canonical_key,
                },
            )
            self._emit(
                "agent_message",
                ts,
                {
                    "subgroup_id": tt.id,
                    "seq": msg.seq,
                    "author": msg.author,
                    "text": msg.text,
                    "insight_id": msg.insight_id,
                },
            )

        # Scope-appropriate views, plus the always-recorded global profile.
        duration_ms = self._round_end_t - self._round_start_t
        fraction = min(max((ts - self._round_start_t) / duration_ms, 0.0), 1.0)
        scope = scope_at(fraction, self.config.scope)
        if scope != SCOPE_GLOBAL:
            order = [tt.id for tt in self.subgroups]
            members_of = {tt.id: tt.member_ids for tt in self.subgroups}
            for tt in self.subgroups:
                if scope == SCOPE_LOCAL:
                    pids = list(tt.member_ids)
                else:
                    pids = [
                        pid
                        for g in order
                        if g in region_of(tt.id, order)
                        for pid in members_of[g]
                    ]
                profile = aggregate([self.support[pid] for pid in pids])
                self._emit(
                    "snapshot",
                    ts,
                    {
                        "scope": scope,
                        "subgroup_id": tt.id,
                        "profile": list(profile),
                        "mean": weighted_mean(profile),
                        "broadcast": True,
                    },
                )
        global_profile = aggregate([self.support[pid] for pid in self.participants])
        global_mean = weighted_mean(global_profile)
        self._emit(
            "snapshot",
            ts,
            {
                "scope": SCOPE_GLOBAL,
                "subgroup_id": None,
                "profile": list(global_profile),
                "mean": global_mean,
                "broadcast": scope == SCOPE_GLOBAL,
            },
        )
        self.series_by_round[self.round_index].append(ts, global_mean)

    def _finalize_round(self, ts: int) -> None:
        ts = self._t(ts + self._origin_ms)
        q = self.config.questions[self.round_index]
        final_profile = aggregate([self.support[pid] for pid in self.participants])
        forecast = finalize(final_profile, q.id)
        self.forecasts.append(forecast)
        self.state = STATE_BETWEEN
        self._emit(
            "round_finalized",
            ts,
            {
                "round_index": self.round_index,
                "question_id": q.id,
                "forecast": forecast.to_payload(),
                "dme": self._dme_snapshot(),
            },
        )

    def _dme_snapshot(self) -> dict:
        """Matching-engine state, serialized for replay verification."""
        return {
            "exposure": {
                g: sorted(keys)
                for g, keys in sorted(self.matching.exposure.items())
                if keys
            },
            "registry": [
                {
                    "canonical_key": e.insight.canonical_key,
                    "insight_id": e.insight.id,
                    "side": e.insight.side,
                    "origin_subgroup": e.insight.origin_subgroup,
                    "conviction": e.insight.conviction,
                    "raise_count": e.raise_count,
                    "share_count": e.share_count,
                }
                for e in self.matching.registry
            ],
        }

    def end_session(self, now_ms: int) -> None:
        if self.state == STATE_ENDED:
            return
        if self.state == STATE_ROUND:
            raise RoundInProgress("cannot end the session mid-round")
        self.state = STATE_ENDED
        self._emit("session_ended", self._t(now_ms), {})

    # -- read side ------------------------------------------------------------

    def remaining_ms(self, now_ms: int) -> int:
        if self.state != STATE_ROUND:
            return 0
        return max(0, self._round_end_t - (now_ms - self._origin_ms))

    def subgroup_of(self, participant_id: str) -> str | None:
        return self._subgroup_of.get(participant_id)

    def sentiment_series(self, round_index: int) -> SentimentSeries:
        return self.series_by_round[round_index]
