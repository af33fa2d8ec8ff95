"""Scripted synthetic participants driving full sessions on a virtual clock.

Stands in for a human panel: every scripted participant speaks in the mock
marker grammar on a jittered schedule, so whole multi-round sessions finish
in well under a second of wall time and, for a fixed seed, export
byte-identical event logs run after run.

The default transport is the in-process session core. `run_scenario_ws`
drives a live server over its WebSocket/HTTP surface instead; that path is
for smoke and integration use, not byte-level determinism (network arrival
order is not reproducible).
"""

from __future__ import annotations

import asyncio
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .analyzer import MockAnalyzer
from .domain import ForecastQuestion, canonical_options
from .events import EventRecord
from .session import SessionConfig, SessionEngine

DEFAULT_REASON_POOL = [
    "their defense travels well",
    "bench depth is thin",
    "back to back fatigue is real",
    "home crowd edge",
    "their star is questionable tonight",
    "the pace mismatch favors them",
    "they own the glass",
    "turnover prone against pressure",
]

_TEAM_PAIRS = [
    ("Harbor Sharks", "Mesa Coyotes"),
    ("North Ridge Owls", "Bayline Comets"),
    ("Iron City Bears", "Palm Valley Rays"),
    ("Lakeshore Loons", "Redrock Miners"),
    ("Capital Falcons", "Dockside Pilots"),
    ("Summit Elks", "Old Town Rovers"),
]


class ServerUnreachable(ConnectionError):
    """The live-server transport could not reach or keep a server connection."""


@dataclass
class ScenarioSpec:
    n_participants: int
    p_a: float = 0.5  # probability a scripted participant backs team A
    conviction_lo: float = 0.5
    conviction_hi: float = 0.9
    rate_per_min: float = 6.0  # messages per participant per minute
    reason_pool: list[str] = field(default_factory=lambda: list(DEFAULT_REASON_POOL))
    seed: int = 0
    n_questions: int = 4
    round_duration_s: int = 300
    between_rounds_ms: int = 1_000
    persuadable: bool = False
    config_overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_participants < 2:
            raise ValueError("scenario needs at least 2 participants")
        if not 0.0 <= self.p_a <= 1.0:
            raise ValueError(f"p_a must be in [0, 1], got {self.p_a}")
        if self.rate_per_min <= 0:
            raise ValueError("rate_per_min must be positive")
        if not 0.0 <= self.conviction_lo <= self.conviction_hi <= 1.0:
            raise ValueError("conviction bounds must satisfy 0 <= lo <= hi <= 1")
        if not self.reason_pool:
            raise ValueError("reason_pool must be non-empty")

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioSpec":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


@dataclass
class ParticipantScript:
    participant_id: str
    side: str
    conviction: float
    message_times: list[list[int]]  # per round, ms offsets from round start
    rng: random.Random

    def next_text(self, reason_pool: list[str]) -> str:
        reason = self.rng.choice(reason_pool)
        return f"[pick:{self.side}][conf:{self.conviction:.2f}] {reason}"

    def maybe_flip(self, opposing_side: str, opposing_conviction: float) -> bool:
        """Persuadable mode: flip sides with probability ~ received conviction."""
        if self.side == opposing_side:
            return False
        if self.rng.random() < 0.5 * opposing_conviction:
            self.side = opposing_side
            return True
        return False


def generate_population(spec: ScenarioSpec) -> list[ParticipantScript]:
    """Reproducible behavior scripts: sides, convictions, message schedules."""
    spec.validate()
    duration_ms = spec.round_duration_s * 1000
    interval = 60_000.0 / spec.rate_per_min
    n_msgs = math.floor(duration_ms / interval)

    scripts = []
    for i in range(spec.n_participants):
        pid = f"p{i + 1:03d}"
        rng = random.Random(f"{spec.seed}:{pid}")
        side = "A" if rng.random() < spec.p_a else "B"
        conviction = round(rng.uniform(spec.conviction_lo, spec.conviction_hi), 2)
        times = [
            sorted(int((k + rng.random()) * interval) for k in range(n_msgs))
            for _ in range(spec.n_questions)
        ]
        scripts.append(ParticipantScript(pid, side, conviction, times, rng))
    return scripts


def scenario_questions(spec: ScenarioSpec) -> list[ForecastQuestion]:
    questions = []
    for r in range(spec.n_questions):
        team_a, team_b = _TEAM_PAIRS[r % len(_TEAM_PAIRS)]
        questions.append(
            ForecastQuestion(
                id=f"g{r + 1}",
                team_a=team_a,
                team_b=team_b,
                spread=float((-1) ** r * (2.5 + r)),
                options=canonical_options(),
                round_duration=spec.round_duration_s,
            )
        )
    return questions


def scenario_config(spec: ScenarioSpec) -> SessionConfig:
    cfg = SessionConfig(questions=scenario_questions(spec), seed=spec.seed)
    for key, value in spec.config_overrides.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config override {key!r}")
        setattr(cfg, key, value)
    return cfg


def run_scenario(spec: ScenarioSpec) -> list[EventRecord]:
    """Drive a full session in-process on a virtual clock; return its event log."""
    return simulate(spec).export_events()


def simulate(spec: ScenarioSpec) -> SessionEngine:
    """Like run_scenario, but hands back the live engine for state inspection."""
    spec.validate()
    config = scenario_config(spec)
    engine = SessionEngine(
        config,
        analyzer=MockAnalyzer(),
        session_id=f"sim-{spec.seed:08d}",
        now_ms=0,
    )
    scripts = generate_population(spec)
    by_id = {s.participant_id: s for s in scripts}
    for s in scripts:
        engine.join(s.participant_id, now_ms=0)

    # Map insight ids to (side, conviction) as registrations stream by, so
    # persuadable participants can react to what their surrogate voices.
    insight_info: dict[str, tuple[str, float]] = {}
    members_of: dict[str, list[str]] = {}

    clock = 1_000
    duration_ms = spec.round_duration_s * 1000
    interval = config.snapshot_interval_ms
    for r in range(spec.n_questions):
        engine.start_round(r, now_ms=clock)
        if not members_of:
            members_of = {tt.id: list(tt.member_ids) for tt in engine.subgroups}

        agenda: list[tuple[int, int, str, int]] = []
        for s in scripts:
            for j, offset in enumerate(s.message_times[r]):
                agenda.append((clock + offset, 0, s.participant_id, j))
        k = 1
        while k * interval <= duration_ms:
            agenda.append((clock + k * interval, 1, "", 0))
            k += 1
        if duration_ms % interval:
            agenda.append((clock + duration_ms, 1, "", 0))
        agenda.sort()

        for t, prio, pid, _ in agenda:
            if prio == 0:
                script = by_id[pid]
                engine.ingest_chat(pid, script.next_text(spec.reason_pool), now_ms=t)
            else:
                emitted = engine.tick(t)
                if spec.persuadable:
                    _apply_persuasion(emitted, by_id, members_of, insight_info)
        clock += duration_ms + spec.between_rounds_ms

    engine.end_session(now_ms=clock)
    return engine


def _apply_persuasion(
    emitted: list[EventRecord],
    by_id: dict[str, ParticipantScript],
    members_of: dict[str, list[str]],
    insight_info: dict[str, tuple[str, float]],
) -> None:
    for rec in emitted:
        if rec.kind == "insight_registered":
            ins = rec.payload["insight"]
            insight_info[ins["id"]] = (ins["side"], ins["conviction"])
        elif rec.kind == "agent_message":
            info = insight_info.get(rec.payload["insight_id"])
            if info is None:
                continue
            side, conviction = info
            for pid in members_of[rec.payload["subgroup_id"]]:
                by_id[pid].maybe_flip(side, conviction)


async def run_scenario_ws(spec: ScenarioSpec, base_url: str) -> list[EventRecord]:
    """Drive a live server over HTTP + WebSocket; return the exported log.

    Raises ServerUnreachable when the server cannot be reached at any step.
    """
    import aiohttp

    spec.validate()
    config = scenario_config(spec)
    scripts = generate_population(spec)
    http_base = base_url.rstrip("/")
    ws_base = http_base.replace("http://", "ws://").replace("https://", "wss://")

    try:
        async with aiohttp.ClientSession() as http:
            resp = await http.post(
                f"{http_base}/api/sessions", json=config.to_payload()
            )
            if resp.status != 200:
                raise ServerUnreachable(f"create session: HTTP {resp.status}")
            sid = (await resp.json())["session_id"]

            sockets = []
            for s in scripts:
                ws = await http.ws_connect(f"{ws_base}/ws/{sid}")
                await ws.send_json(
                    {"kind": "hello", "participant_id": s.participant_id}
                )
                # Joins must land before the first round closes the lobby.
                while True:
                    frame = await ws.receive_json()
                    if frame.get("kind") == "joined":
                        break
                    if frame.get("kind") == "error":
                        raise ServerUnreachable(f"join failed: {frame.get('code')}")
                sockets.append((s, ws))

            loop = asyncio.get_running_loop()
            duration_s = spec.round_duration_s
            for r in range(spec.n_questions):
                resp = await http.post(
                    f"{http_base}/api/sessions/{sid}/rounds/{r}/start"
                )
                if resp.status != 200:
                    raise ServerUnreachable(f"start round {r}: HTTP {resp.status}")
                round_t0 = loop.time()

                async def talk(script: ParticipantScript, ws, start: float) -> None:
                    for offset in script.message_times[r]:
                        delay = start + offset / 1000.0 - loop.time()
                        if delay > 0:
                            await asyncio.sleep(delay)
                        await ws.send_json(
                            {"kind": "chat", "text": script.next_text(spec.reason_pool)}
                        )

                await asyncio.gather(*(talk(s, ws, round_t0) for s, ws in sockets))
                # Let the server's clock cross the round boundary and finalize.
                remaining = round_t0 + duration_s + 0.75 - loop.time()
                if remaining > 0:
                    await asyncio.sleep(remaining)

            for _, ws in sockets:
                await ws.close()
            resp = await http.get(f"{http_base}/api/sessions/{sid}/log")
            if resp.status != 200:
                raise ServerUnreachable(f"export log: HTTP {resp.status}")
            text = await resp.text()
    except aiohttp.ClientError as exc:
        raise ServerUnreachable(str(exc)) from exc

    return [
        EventRecord.from_json_line(line) for line in text.splitlines() if line.strip()
    ]
