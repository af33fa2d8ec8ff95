"""Deliberative matching: exposure tracking and challenge-maximizing routing.

One engine instance serves one session; all register/select/mark calls for a
session arrive through a single ordered command stream, so no locking here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import SIDE_A
from .analyzer import Insight


@dataclass
class RegisteredInsight:
    insight: Insight
    index: int  # registration order, stable for the session
    raise_count: int = 1  # organic raises, across all subgroups
    share_count: int = 0  # surrogate expressions delivered


def side_sign(side: str) -> int:
    return -1 if side == SIDE_A else 1


def challenge_score(insight: Insight, prevailing_mean: float) -> float:
    """How much an insight pushes against a subgroup's current lean.

    Positive when the insight argues the side the subgroup is leaning away
    from; an insight agreeing with the lean scores negative but is still
    routable (delivery either sways the group or provokes pushback).
    """
    return -side_sign(insight.side) * prevailing_mean


class MatchingEngine:
    """Tracks per-subgroup insight exposure and picks what each surrogate voices next."""

    def __init__(self) -> None:
        self.registry: list[RegisteredInsight] = []
        self._by_key: dict[str, RegisteredInsight] = {}
        self.exposure: dict[str, set[str]] = {}

    def _exposure_of(self, subgroup_id: str) -> set[str]:
        return self.exposure.setdefault(subgroup_id, set())

    def register_insight(self, insight: Insight) -> int:
        """Record an organically raised insight; dedup on canonical_key.

        The raising subgroup becomes exposed immediately. A re-raise of a
        known key bumps its raise counter and exposes the (possibly new)
        raising subgroup, returning the canonical entry's index.
        """
        entry = self._by_key.get(insight.canonical_key)
        if entry is None:
            entry = RegisteredInsight(insight=insight, index=len(self.registry))
            self.registry.append(entry)
            self._by_key[insight.canonical_key] = entry
        else:
            entry.raise_count += 1
        self._exposure_of(insight.origin_subgroup).add(insight.canonical_key)
        return entry.index

    def select_for(self, subgroup_id: str, prevailing_mean: float) -> Insight | None:
        """Pick the novel insight that maximally challenges a subgroup.

        Candidates are registered insights the subgroup has not been exposed
        to and that did not originate there. Ties on challenge score break by
        higher conviction, then lower share count, then registration order.
        Returns None when nothing novel remains.
        """
        exposed = self._exposure_of(subgroup_id)
        best: RegisteredInsight | None = None
        best_rank: tuple[float, float, int, int] | None = None
        for entry in self.registry:
            ins = entry.insight
            if ins.canonical_key in exposed or ins.origin_subgroup == subgroup_id:
                continue
            rank = (
                -challenge_score(ins, prevailing_mean),
                -ins.conviction,
                entry.share_count,
                entry.index,
            )
            if best_rank is None or rank < best_rank:
                best, best_rank = entry, rank
        return best.insight if best else None

    def mark_exposed(self, subgroup_id: str, insight: Insight) -> bool:
        """Record that a surrogate expressed this insight in a subgroup.

        Idempotent on the exposure set; the share counter only advances the
        first time a given subgroup hears the insight.
        """
        exposed = self._exposure_of(subgroup_id)
        if insight.canonical_key in exposed:
            return False
        exposed.add(insight.canonical_key)
        entry = self._by_key.get(insight.canonical_key)
        if entry is not None:
            entry.share_count += 1
        return True

    def entry_for(self, canonical_key: str) -> RegisteredInsight | None:
        return self._by_key.get(canonical_key)

    def exposure_sets(self) -> dict[str, frozenset[str]]:
        return {g: frozenset(keys) for g, keys in self.exposure.items()}
