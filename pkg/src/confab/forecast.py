"""Turn an end-of-round support profile into a collective pick or toss-up."""

from __future__ import annotations

from dataclasses import dataclass

from .domain import SIDE_A, SIDE_B
from .sentiment import MalformedProfile, _check_profile, weighted_mean

# Weighted means inside [-TOSSUP_BAND, +TOSSUP_BAND] (closed) are "no forecast".
TOSSUP_BAND = 0.08

PICK_NONE = "none"


@dataclass(frozen=True)
class CollectiveForecast:
    question_id: str
    wcf: float  # weighted mean of the final profile, in [-2, +2]
    pick: str  # "A", "B", or "none"
    risk_points: int | None  # 10 or 20, None on toss-up
    is_tossup: bool
    final_profile: tuple[float, float, float, float]

    def to_payload(self) -> dict:
        return {
            "question_id": self.question_id,
            "wcf": self.wcf,
            "pick": self.pick,
            "risk_points": self.risk_points,
            "is_tossup": self.is_tossup,
            "final_profile": list(self.final_profile),
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "CollectiveForecast":
        return cls(
            question_id=doc["question_id"],
            wcf=float(doc["wcf"]),
            pick=doc["pick"],
            risk_points=doc["risk_points"],
            is_tossup=bool(doc["is_tossup"]),
            final_profile=tuple(float(x) for x in doc["final_profile"]),
        )


def finalize(final_profile, question_id: str) -> CollectiveForecast:
    """Classify the final profile: pick A below -0.08, B above +0.08, else toss-up.

    The band is closed, so a mean landing exactly on +/-0.08 is still "no
    forecast". The risk level is whichever of the picked side's two options
    holds more aggregate support, falling back to the conservative 10 points
    on an exact tie.
    """
    profile = _check_profile(final_profile)
    wcf = weighted_mean(profile)

    if abs(wcf) <= TOSSUP_BAND:
        return CollectiveForecast(question_id, wcf, PICK_NONE, None, True, profile)

    if wcf < 0:
        pick = SIDE_A
        hi_support, lo_support = profile[0], profile[1]  # (A,20) vs (A,10)
    else:
        pick = SIDE_B
        hi_support, lo_support = profile[3], profile[2]  # (B,20) vs (B,10)
    risk = 20 if hi_support > lo_support else 10
    return CollectiveForecast(question_id, wcf, pick, risk, False, profile)


__all__ = ["CollectiveForecast", "finalize", "TOSSUP_BAND", "PICK_NONE", "MalformedProfile"]
