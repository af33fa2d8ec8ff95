"""Core domain types: forecast questions, participants, thinktank partitioning.

Everything here is a plain value type plus pure functions, safe to share
across threads. The four forecast options are always generated canonically
from a question fixture; they are never hand-authored.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

# Option order used everywhere downstream (support vectors, profiles, charts):
# index 0..3 <-> scale values (-2, -1, +1, +2).
SCALE_ORDER = (-2, -1, 1, 2)

SIDE_A = "A"
SIDE_B = "B"


class TooFewParticipants(ValueError):
    """Raised when a population is too small to partition into subgroups."""


@dataclass(frozen=True)
class ForecastOption:
    side: str  # "A" or "B"
    risk_points: int  # 10 or 20
    scale_value: int  # one of -2, -1, +1, +2


def canonical_options(risk_at_extreme: bool = True) -> tuple[ForecastOption, ...]:
    """Build the four options in scale order.

    By default the 20-point (high confidence) option sits at the extreme of
    each side: (A,20)=-2, (A,10)=-1, (B,10)=+1, (B,20)=+2, so conviction is
    monotone along the scale. Pass risk_at_extreme=False to flip which risk
    level occupies the extremes.
    """
    hi, lo = (20, 10) if risk_at_extreme else (10, 20)
    return (
        ForecastOption(SIDE_A, hi, -2),
        ForecastOption(SIDE_A, lo, -1),
        ForecastOption(SIDE_B, lo, 1),
        ForecastOption(SIDE_B, hi, 2),
    )


@dataclass(frozen=True)
class ForecastQuestion:
    id: str
    team_a: str
    team_b: str
    spread: float  # positive = team_a favored by that many points
    options: tuple[ForecastOption, ...] = field(default_factory=canonical_options)
    round_duration: int = 300  # seconds

    def team_for(self, side: str) -> str:
        return self.team_a if side == SIDE_A else self.team_b

    @property
    def favorite_side(self) -> str | None:
        if self.spread > 0:
            return SIDE_A
        if self.spread < 0:
            return SIDE_B
        return None

    def to_fixture(self) -> dict:
        return {
            "id": self.id,
            "team_a": self.team_a,
            "team_b": self.team_b,
            "spread": self.spread,
            "round_duration": self.round_duration,
        }


def question_from_fixture(doc: dict, risk_at_extreme: bool = True) -> ForecastQuestion:
    """Build a question from a JSON fixture {id, team_a, team_b, spread, round_duration}."""
    return ForecastQuestion(
        id=str(doc["id"]),
        team_a=str(doc["team_a"]),
        team_b=str(doc["team_b"]),
        spread=float(doc["spread"]),
        options=canonical_options(risk_at_extreme),
        round_duration=int(doc.get("round_duration", 300)),
    )


def load_question_fixtures(path: str | Path) -> list[ForecastQuestion]:
    """Load one question or a list of questions from a JSON document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = [doc]
    return [question_from_fixture(d) for d in doc]


def validate_question(q: ForecastQuestion) -> list[str]:
    """Return every invariant violation (empty list means the question is valid)."""
    violations: list[str] = []
    if not q.id:
        violations.append("question id must be non-empty")
    if len(q.options) != 4:
        violations.append("exactly four options required")
    scales = sorted(o.scale_value for o in q.options)
    if scales != sorted(SCALE_ORDER):
        seen: set[int] = set()
        for o in q.options:
            if o.scale_value in seen:
                violations.append("duplicate scale value %+d" % o.scale_value)
            seen.add(o.scale_value)
        if set(scales) - set(SCALE_ORDER):
            violations.append("scale values must be drawn from {-2, -1, +1, +2}")
        elif len(q.options) == 4 and not violations:
            violations.append("scale values must cover {-2, -1, +1, +2} exactly once")
    for o in q.options:
        if o.side not in (SIDE_A, SIDE_B):
            violations.append(f"option side must be A or B, got {o.side!r}")
        elif (o.scale_value < 0) != (o.side == SIDE_A):
            violations.append(
                f"option sign mismatch: side {o.side} with scale {o.scale_value:+d}"
            )
        if o.risk_points not in (10, 20):
            violations.append(f"risk must be 10 or 20 points, got {o.risk_points}")
    if not math.isfinite(q.spread):
        violations.append("spread must be finite")
    if q.round_duration <= 0:
        violations.append("round_duration must be positive")
    return violations


@dataclass
class Participant:
    id: str
    display_name: str
    subgroup_id: str | None = None


@dataclass
class Thinktank:
    id: str
    member_ids: list[str]
    surrogate_id: str


@dataclass(frozen=True)
class ChatMessage:
    seq: int  # per-subgroup, strictly increasing
    timestamp: int  # ms since session start
    author: str  # participant id or surrogate id
    subgroup_id: str
    text: str
    insight_id: str | None = None  # set on surrogate expressions only


def partition_participants(
    ids: list[str], target_size: int = 5, seed: int = 0
) -> list[Thinktank]:
    """Randomly split participants into balanced thinktanks.

    Produces ceil(n / target_size) subgroups whose sizes differ by at most
    one. The assignment is a seed-determined permutation of the input ids,
    so the same (ids, target_size, seed) always yields the same partition.
    """
    if len(ids) < 2:
        raise TooFewParticipants(f"need at least 2 participants, got {len(ids)}")
    if target_size < 2:
        raise ValueError(f"target_size must be >= 2, got {target_size}")
    if len(set(ids)) != len(ids):
        raise ValueError("participant ids must be unique")

    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)

    n = len(shuffled)
    n_groups = math.ceil(n / target_size)
    base, extra = divmod(n, n_groups)
    # The first `extra` groups take one more member than the rest.
    groups: list[Thinktank] = []
    cursor = 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        tt_id = f"tt{g + 1}"
        groups.append(
            Thinktank(
                id=tt_id,
                member_ids=shuffled[cursor : cursor + size],
                surrogate_id=f"agent-{tt_id}",
            )
        )
        cursor += size
    return groups
