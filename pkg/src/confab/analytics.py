"""Score session logs against game outcomes: records, ROI, exact binomial tests.

A pure log-and-outcomes consumer. Picks come from round_finalized records,
conversation rates from the chat records of the same rounds, and outcomes
from a CSV with columns question_id, covering_side, favorite_side.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .events import EventRecord, iter_log_dir

PUSH = "push"

# Standard -110 pricing: stake 110 to win 100.
WIN_PAYOUT_PER_DOLLAR = 100.0 / 110.0


class MissingOutcome(KeyError):
    """A scored pick has no game outcome to settle against."""


class NoPicks(ValueError):
    """ROI over an empty record is undefined."""


@dataclass(frozen=True)
class GameOutcome:
    question_id: str
    covering_side: str  # "A", "B", or "push"
    favorite_side: str  # "A", "B", or "none"


@dataclass
class PickRecord:
    question_id: str
    pick: str  # "A" or "B" (toss-ups never become PickRecords)
    wcf: float
    conversation_rate: float  # characters / minute / participant
    is_favorite_pick: bool
    won: bool | None  # None on a push (excluded from records)


@dataclass(frozen=True)
class ReportRow:
    label: str
    n_games: int
    wins: int
    losses: int
    accuracy: float  # wins / n_games
    roi: float  # fraction, e.g. 0.184
    p_value: float

    def record(self) -> str:
        return f"{self.wins}-{self.losses} ({100 * self.accuracy:.1f}%)"


def load_outcomes_csv(path: str | Path) -> dict[str, GameOutcome]:
    outcomes: dict[str, GameOutcome] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            qid = row["question_id"].strip()
            if qid in outcomes:
                raise ValueError(f"duplicate outcome for question {qid!r}")
            covering = row["covering_side"].strip()
            favorite = row.get("favorite_side", "none").strip() or "none"
            if covering not in ("A", "B", PUSH):
                raise ValueError(f"covering_side must be A, B, or push, got {covering!r}")
            outcomes[qid] = GameOutcome(qid, covering, favorite)
    return outcomes


def binomial_p(n: int, k: int, p0: float = 0.5) -> float:
    """Exact one-sided upper tail P(X >= k) for X ~ Binomial(n, p0).

    Straight summation of exact binomial coefficients; no normal
    approximation anywhere.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be in [0, 1], got {p0}")
    terms = [
        math.comb(n, i) * p0**i * (1.0 - p0) ** (n - i) for i in range(k, n + 1)
    ]
    return min(1.0, math.fsum(terms))


@dataclass(frozen=True)
class RoiResult:
    wins: int
    losses: int
    stake: float
    profit: float
    roi: float  # profit / total staked


def roi(wins: int, losses: int, stake: float = 100.0) -> RoiResult:
    """Flat-stake return at -110 odds: each win pays stake*100/110, each loss costs stake."""
    n = wins + losses
    if n < 1:
        raise NoPicks("no settled picks to compute ROI over")
    profit = wins * (stake * WIN_PAYOUT_PER_DOLLAR) - losses * stake
    return RoiResult(wins, losses, stake, profit, profit / (stake * n))


def _round_views(records: list[EventRecord]) -> list[dict]:
    """Per-round slices of one session log that analytics cares about."""
    n_participants = 0
    rounds: list[dict] = []
    current: dict | None = None
    for rec in records:
        if rec.kind == "participant_joined":
            n_participants += 1
        elif rec.kind == "round_started":
            current = {
                "question_id": rec.payload["question"]["id"],
                "duration_s": rec.payload["duration_s"],
                "n_participants": n_participants,
                "chars": 0,
                "forecast": None,
            }
        elif rec.kind == "chat" and current is not None:
            current["chars"] += len(rec.payload["text"])
        elif rec.kind == "round_finalized" and current is not None:
            current["forecast"] = rec.payload["forecast"]
            rounds.append(current)
            current = None
    return rounds


def conversation_rate_of(view: dict) -> float:
    """Participant-authored characters per minute per participant for one round."""
    minutes = view["duration_s"] / 60.0
    if minutes <= 0 or view["n_participants"] == 0:
        return 0.0
    return view["chars"] / minutes / view["n_participants"]


def conversation_rate(records: list[EventRecord], round_index: int) -> float:
    views = _round_views(records)
    return conversation_rate_of(views[round_index])


def score_picks(
    session_logs: list[list[EventRecord]], outcomes: dict[str, GameOutcome]
) -> list[PickRecord]:
    """Settle every non-toss-up forecast across a set of session logs.

    Toss-ups carry no pick and are dropped; pushes stay in the list with
    won=None so callers can exclude them from records and ROI alike.
    Raises MissingOutcome when a settled pick has no outcome row.
    """
    picks: list[PickRecord] = []
    for records in session_logs:
        for view in _round_views(records):
            forecast = view["forecast"]
            if forecast["is_tossup"]:
                continue
            qid = forecast["question_id"]
            outcome = outcomes.get(qid)
            if outcome is None:
                raise MissingOutcome(qid)
            pick = forecast["pick"]
            won = None if outcome.covering_side == PUSH else pick == outcome.covering_side
            picks.append(
                PickRecord(
                    question_id=qid,
                    pick=pick,
                    wcf=forecast["wcf"],
                    conversation_rate=conversation_rate_of(view),
                    is_favorite_pick=pick == outcome.favorite_side,
                    won=won,
                )
            )
    return picks


def _settled(picks: list[PickRecord]) -> list[PickRecord]:
    return [p for p in picks if p.won is not None]


def make_row(label: str, picks: list[PickRecord]) -> ReportRow:
    settled = _settled(picks)
    wins = sum(1 for p in settled if p.won)
    losses = len(settled) - wins
    n = len(settled)
    if n == 0:
        return ReportRow(label, 0, 0, 0, 0.0, 0.0, 1.0)
    return ReportRow(
        label=label,
        n_games=n,
        wins=wins,
        losses=losses,
        accuracy=wins / n,
        roi=roi(wins, losses).roi,
        p_value=binomial_p(n, wins),
    )


def split_by_rate(
    picks: list[PickRecord], quantile: float = 0.25
) -> tuple[list[PickRecord], list[PickRecord]]:
    """Split settled picks into the low-conversation cohort and the rest.

    The lower cohort is the floor(quantile * n) picks with the lowest rates
    (stable tie-break on question id), so an all-ties population still yields
    a minimal lower cohort rather than swallowing everything.
    """
    if not 0.0 <= quantile < 1.0:
        raise ValueError(f"quantile must be in [0, 1), got {quantile}")
    settled = _settled(picks)
    ordered = sorted(settled, key=lambda p: (p.conversation_rate, p.question_id))
    n_lower = math.floor(quantile * len(ordered))
    return ordered[:n_lower], ordered[n_lower:]


def cohort_report(picks: list[PickRecord], quantile: float = 0.25) -> list[ReportRow]:
    """Table-layout rows: All / Favorite / Underdog, then the rate cohorts."""
    settled = _settled(picks)
    favorites = [p for p in settled if p.is_favorite_pick]
    underdogs = [p for p in settled if not p.is_favorite_pick]
    lower, upper = split_by_rate(settled, quantile)
    lo_pct = int(round(quantile * 100))
    return [
        make_row("All picks", settled),
        make_row("Favorite picks", favorites),
        make_row("Underdog picks", underdogs),
        make_row(f"Lower {lo_pct}%", lower),
        make_row(f"Upper {100 - lo_pct}%", upper),
    ]


def load_logs(log_dir: str | Path) -> list[list[EventRecord]]:
    return [records for _, records in iter_log_dir(log_dir)]


# -- rendering ----------------------------------------------------------------


def render_table(rows: list[ReportRow]) -> str:
    headers = ("Cohort", "Num Games", "Record (Accuracy)", "ROI", "p-value")
    body = [
        (
            r.label,
            str(r.n_games),
            r.record(),
            f"{100 * r.roi:+.1f}%",
            f"{r.p_value:.3f}",
        )
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for b in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(b, widths)))
    return "\n".join(lines)


def render_csv(rows: list[ReportRow]) -> str:
    out = ["label,n_games,wins,losses,accuracy_pct,roi_pct,p_value"]
    for r in rows:
        out.append(
            f"{r.label},{r.n_games},{r.wins},{r.losses},"
            f"{100 * r.accuracy:.1f},{100 * r.roi:+.1f},{r.p_value:.3f}"
        )
    return "\n".join(out)


def rows_as_json(rows: list[ReportRow]) -> list[dict]:
    return [
        {
            "label": r.label,
            "n_games": r.n_games,
            "wins": r.wins,
            "losses": r.losses,
            "accuracy_pct": round(100 * r.accuracy, 1),
            "roi_pct": round(100 * r.roi, 1),
            "p_value": round(r.p_value, 3),
        }
        for r in rows
    ]
