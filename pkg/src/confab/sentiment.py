"""Support aggregation: scale-weighted means, scope schedule, ring regions.

The weighted mean maps a 4-component support profile onto the -2..+2 scale:
profile . (-2, -1, +1, +2). It is linear, so the mean of an aggregate equals
the aggregate of the members' means under the same weights.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .analyzer import SupportVector
from .domain import SCALE_ORDER

SCOPE_LOCAL = "local"
SCOPE_REGIONAL = "regional"
SCOPE_GLOBAL = "global"

_NORMALIZATION_TOL = 1e-9


class MalformedProfile(ValueError):
    """Profile is negative somewhere or does not sum to 1 within tolerance."""


class EmptyPopulation(ValueError):
    """Aggregation was asked to average zero support vectors (or zero weight)."""


def _check_profile(profile) -> tuple[float, float, float, float]:
    values = tuple(float(x) for x in profile)
    if len(values) != 4:
        raise MalformedProfile(f"profile must have 4 components, got {len(values)}")
    if any(x < 0 for x in values):
        raise MalformedProfile(f"profile has negative support: {values}")
    if abs(sum(values) - 1.0) > _NORMALIZATION_TOL:
        raise MalformedProfile(f"profile sums to {sum(values)!r}, not 1")
    return values


def weighted_mean(profile) -> float:
    """Scale-weighted mean of a support profile, in [-2, +2]."""
    values = _check_profile(profile)
    return sum(w * v for w, v in zip(values, SCALE_ORDER))


def aggregate(
    vectors: list[SupportVector], weights: list[float] | None = None
) -> tuple[float, float, float, float]:
    """Component-wise (weighted) average of support vectors, renormalized.

    Weights default to uniform; they must be nonnegative and not all zero.
    """
    if not vectors:
        raise EmptyPopulation("no support vectors to aggregate")
    if weights is None:
        weights = [1.0] * len(vectors)
    if len(weights) != len(vectors):
        raise ValueError(f"{len(weights)} weights for {len(vectors)} vectors")
    if any(w < 0 for w in weights):
        raise ValueError("aggregation weights must be nonnegative")
    total_w = sum(weights)
    if total_w <= 0:
        raise EmptyPopulation("aggregation weights sum to zero")

    acc = [0.0, 0.0, 0.0, 0.0]
    for vec, w in zip(vectors, weights):
        for i, x in enumerate(vec.w):
            acc[i] += w * x
    total = sum(acc)
    return tuple(x / total for x in acc)


@dataclass(frozen=True)
class ScopeSchedule:
    """When the displayed sentiment widens from local to regional to global."""

    local_until: float = 0.4  # fraction of the round
    regional_until: float = 0.7

    def __post_init__(self) -> None:
        if not 0.0 < self.local_until < self.regional_until < 1.0:
            raise ValueError(
                f"need 0 < local_until < regional_until < 1, "
                f"got {self.local_until}, {self.regional_until}"
            )


def scope_at(elapsed_fraction: float, sched: ScopeSchedule) -> str:
    if not 0.0 <= elapsed_fraction <= 1.0:
        raise ValueError(f"elapsed_fraction must be in [0, 1], got {elapsed_fraction}")
    if elapsed_fraction < sched.local_until:
        return SCOPE_LOCAL
    if elapsed_fraction < sched.regional_until:
        return SCOPE_REGIONAL
    return SCOPE_GLOBAL


def region_of(subgroup_id: str, all_subgroups: list[str]) -> set[str]:
    """Subgroups visible at regional scope: self plus both ring neighbors.

    The ring follows partition order, so regions are symmetric: b in
    region_of(a) iff a in region_of(b). Degenerates gracefully for 1 or 2
    subgroups.
    """
    if subgroup_id not in all_subgroups:
        raise ValueError(f"unknown subgroup {subgroup_id!r}")
    n = len(all_subgroups)
    i = all_subgroups.index(subgroup_id)
    if n <= 3:
        return set(all_subgroups)
    return {all_subgroups[(i - 1) % n], subgroup_id, all_subgroups[(i + 1) % n]}


@dataclass(frozen=True)
class SupportSnapshot:
    time_ms: int
    scope: str
    profile: tuple[float, float, float, float]
    weighted_mean: float

    @classmethod
    def capture(cls, time_ms: int, scope: str, profile) -> "SupportSnapshot":
        values = _check_profile(profile)
        return cls(time_ms, scope, values, weighted_mean(values))


@dataclass
class SentimentSeries:
    """Global weighted-mean time series for one round, one point per snapshot tick."""

    points: list[tuple[int, float]] = field(default_factory=list)

    def append(self, time_ms: int, mean: float) -> None:
        if self.points and time_ms <= self.points[-1][0]:
            raise ValueError(
                f"series times must be strictly increasing: {time_ms} after "
                f"{self.points[-1][0]}"
            )
        self.points.append((time_ms, mean))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_ms,mean\n")
        for t, m in self.points:
            buf.write(f"{t},{m!r}\n")
        return buf.getvalue()
