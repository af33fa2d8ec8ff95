"""Rebuild session state from an exported event log.

Two complementary paths:

* fold_replay: a pure fold over the records. It re-derives each forecast from
  its logged final profile, rebuilds the per-round exposure ledgers from the
  insight events, and cross-checks both against the snapshots the engine
  serialized at finalize time. No engine logic re-runs.

* reexecute: replays the command stream (joins, round starts, chats, tick
  times) through a fresh engine. With the deterministic mock analyzer the
  re-run must reproduce the original log byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import question_from_fixture
from .events import EventRecord
from .forecast import CollectiveForecast, finalize
from .sentiment import SentimentSeries, weighted_mean
from .session import SessionConfig, SessionEngine

_MEAN_TOL = 1e-9


class ReplayError(ValueError):
    """The log is internally inconsistent (states do not re-derive)."""


@dataclass
class RoundReplay:
    round_index: int
    question_id: str
    forecast: CollectiveForecast
    exposure: dict[str, set[str]] = field(default_factory=dict)
    raise_counts: dict[str, int] = field(default_factory=dict)
    share_counts: dict[str, int] = field(default_factory=dict)
    registry_keys: list[str] = field(default_factory=list)
    series: SentimentSeries = field(default_factory=SentimentSeries)
    participant_chars: int = 0
    duration_s: int = 0


@dataclass
class ReplayState:
    session_id: str
    config_payload: dict
    participants: dict[str, str] = field(default_factory=dict)  # id -> display name
    subgroup_members: dict[str, list[str]] = field(default_factory=dict)
    rounds: list[RoundReplay] = field(default_factory=list)

    @property
    def forecasts(self) -> list[CollectiveForecast]:
        return [r.forecast for r in self.rounds]


def fold_replay(records: list[EventRecord]) -> ReplayState:
    if not records or records[0].kind != "session_created":
        raise ReplayError("log must begin with session_created")
    head = records[0].payload
    state = ReplayState(session_id=head["session_id"], config_payload=head["config"])

    current: RoundReplay | None = None
    exposure: dict[str, set[str]] = {}
    raises: dict[str, int] = {}
    shares: dict[str, int] = {}
    keys: list[str] = []

    for rec in records:
        kind, p = rec.kind, rec.payload
        if kind == "participant_joined":
            state.participants[p["participant_id"]] = p["display_name"]
        elif kind == "partition_assigned":
            for g in p["subgroups"]:
                state.subgroup_members[g["id"]] = list(g["member_ids"])
        elif kind == "round_started":
            exposure, raises, shares, keys = {}, {}, {}, []
            current = RoundReplay(
                round_index=p["round_index"],
                question_id=p["question"]["id"],
                forecast=None,  # filled at round_finalized
                duration_s=p["duration_s"],
            )
        elif kind == "chat":
            if current is not None and current.forecast is None:
                current.participant_chars += len(p["text"])
        elif kind == "insight_registered":
            ins = p["insight"]
            key = ins["canonical_key"]
            if p["new"]:
                keys.append(key)
            raises[key] = p["raise_count"]
            exposure.setdefault(ins["origin_subgroup"], set()).add(key)
        elif kind == "insight_routed":
            key = p["canonical_key"]
            target = exposure.setdefault(p["subgroup_id"], set())
            if key not in target:
                target.add(key)
                shares[key] = shares.get(key, 0) + 1
        elif kind == "snapshot":
            recomputed = weighted_mean(p["profile"])
            if abs(recomputed - p["mean"]) > _MEAN_TOL:
                raise ReplayError(
                    f"snapshot at t={rec.time_ms} logs mean {p['mean']}, "
                    f"profile re-derives {recomputed}"
                )
            if current is not None and p["scope"] == "global":
                current.series.append(rec.time_ms, p["mean"])
        elif kind == "round_finalized":
            if current is None:
                raise ReplayError("round_finalized without round_started")
            logged = CollectiveForecast.from_payload(p["forecast"])
            rederived = finalize(logged.final_profile, logged.question_id)
            if (
                abs(rederived.wcf - logged.wcf) > _MEAN_TOL
                or rederived.pick != logged.pick
                or rederived.is_tossup != logged.is_tossup
                or rederived.risk_points != logged.risk_points
            ):
                raise ReplayError(
                    f"forecast for {logged.question_id} does not re-derive from "
                    f"its final profile"
                )
            current.forecast = logged
            current.exposure = {g: set(ks) for g, ks in exposure.items()}
            current.raise_counts = dict(raises)
            current.share_counts = dict(shares)
            current.registry_keys = list(keys)
            _check_dme_snapshot(current, p.get("dme"))
            state.rounds.append(current)
            current = None
    return state


def _check_dme_snapshot(round_replay: RoundReplay, dme: dict | None) -> None:
    if not dme:
        return
    snap_exposure = {g: set(ks) for g, ks in dme["exposure"].items()}
    if snap_exposure != round_replay.exposure:
        raise ReplayError(
            f"round {round_replay.round_index}: folded exposure ledger disagrees "
            f"with the engine snapshot"
        )
    snap_keys = [e["canonical_key"] for e in dme["registry"]]
    if snap_keys != round_replay.registry_keys:
        raise ReplayError(
            f"round {round_replay.round_index}: folded registry order disagrees "
            f"with the engine snapshot"
        )
    for entry in dme["registry"]:
        key = entry["canonical_key"]
        if round_replay.raise_counts.get(key) != entry["raise_count"]:
            raise ReplayError(f"raise count mismatch for insight {key}")
        if round_replay.share_counts.get(key, 0) != entry["share_count"]:
            raise ReplayError(f"share count mismatch for insight {key}")


def reexecute(records: list[EventRecord], analyzer=None) -> SessionEngine:
    """Drive a fresh engine with the logged command stream and return it.

    Only valid for sessions produced with the deterministic mock analyzer;
    tick times are recovered from the tick-emitted records themselves.
    """
    if not records or records[0].kind != "session_created":
        raise ReplayError("log must begin with session_created")
    head = records[0].payload
    engine = SessionEngine(
        SessionConfig.from_payload(head["config"]),
        analyzer=analyzer,
        session_id=head["session_id"],
        now_ms=0,
    )
    # Questions loaded through the management API after creation are not in
    # the head record, but every round_started carries its fixture; graft
    # them back the same way the live server did.
    for rec in records:
        if rec.kind == "round_started":
            if rec.payload["round_index"] >= len(engine.config.questions):
                engine.config.questions.append(
                    question_from_fixture(rec.payload["question"])
                )
    last_tick_t: int | None = None
    for rec in records[1:]:
        kind, p = rec.kind, rec.payload
        if kind == "participant_joined":
            engine.join(p["participant_id"], p["display_name"], now_ms=rec.time_ms)
        elif kind == "round_started":
            engine.start_round(p["round_index"], now_ms=rec.time_ms)
            last_tick_t = None
        elif kind == "chat":
            engine.ingest_chat(
                p["author"], p["text"], now_ms=rec.time_ms, client_time_ms=p["client_time_ms"]
            )
        elif kind in ("snapshot", "insight_registered", "insight_routed",
                      "agent_message", "round_finalized"):
            if rec.time_ms != last_tick_t:
                engine.tick(rec.time_ms)
                last_tick_t = rec.time_ms
        elif kind == "session_ended":
            engine.end_session(rec.time_ms)
    return engine
