"""Dialog assessment: stance extraction, support vectors, and shareable insights.

The default analyzer is a deterministic mock built on a marker grammar
("[pick:A][conf:0.8] reason text") with a keyword fallback, so the whole
pipeline is testable without any model in the loop. A chat-completions-style
HTTP backend can be swapped in behind the same interface.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass

from .domain import SIDE_A, SIDE_B, ChatMessage, ForecastQuestion

NEUTRAL = "neutral"
DEFAULT_CONVICTION = 0.5

_MARKER_RE = re.compile(
    r"\[pick:(?P<side>[ABab])\]\s*(?:\[conf:(?P<conf>[01](?:\.\d+)?)\])?\s*", re.ASCII
)

# Phrases that signal a lean when they appear alongside exactly one team name.
_LEAN_CUES = (
    "will cover",
    "covers",
    "cover the spread",
    "beat the spread",
    "beats the spread",
    "i like",
    "i'd take",
    "take the",
    "my pick",
    "easy win",
)


class BackendUnavailable(RuntimeError):
    """External analyzer backend could not produce a usable response."""


@dataclass(frozen=True)
class AssessedStance:
    participant_id: str
    side: str  # "A", "B", or "neutral"
    conviction: float  # in [0, 1]; ignored downstream when neutral
    reasons: tuple[str, ...]
    as_of_seq: int

    @classmethod
    def neutral(cls, participant_id: str, as_of_seq: int = 0) -> "AssessedStance":
        return cls(participant_id, NEUTRAL, 0.0, (), as_of_seq)


@dataclass(frozen=True)
class SupportVector:
    """Per-participant support mass over the four options, in scale order."""

    w: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.w) != 4:
            raise ValueError("support vector has exactly 4 components")
        if any(x < 0 for x in self.w):
            raise ValueError(f"support values must be nonnegative: {self.w}")
        if abs(sum(self.w) - 1.0) > 1e-9:
            raise ValueError(f"support values must sum to 1: {self.w}")

    @classmethod
    def uniform(cls) -> "SupportVector":
        return cls((0.25, 0.25, 0.25, 0.25))

    def as_list(self) -> list[float]:
        return list(self.w)


@dataclass(frozen=True)
class Insight:
    """A forecasted side plus supporting reasons, the unit of cross-subgroup routing."""

    id: str
    side: str  # "A" or "B"
    reasons: tuple[str, ...]
    conviction: float
    origin_subgroup: str
    canonical_key: str


def canonical_key(side: str, reasons: tuple[str, ...] | list[str]) -> str:
    """Stable dedup key: case, punctuation, and whitespace insensitive."""
    text = " ".join(reasons)
    norm = re.sub(r"[^\w\s]", " ", text.lower())
    norm = " ".join(norm.split())
    return hashlib.sha256(f"{side}|{norm}".encode("utf-8")).hexdigest()[:16]


def _signal_in(text: str, q: ForecastQuestion) -> tuple[str, float, str] | None:
    """Return (side, conviction, reason_text) for one message, or None."""
    m = _MARKER_RE.search(text)
    if m:
        side = m.group("side").upper()
        conf = float(m.group("conf")) if m.group("conf") else DEFAULT_CONVICTION
        reason = _MARKER_RE.sub("", text).strip()
        return side, min(max(conf, 0.0), 1.0), reason

    lowered = text.lower()
    if not any(cue in lowered for cue in _LEAN_CUES):
        return None
    has_a = q.team_a.lower() in lowered
    has_b = q.team_b.lower() in lowered
    if has_a == has_b:  # both or neither named: ambiguous, no signal
        return None
    side = SIDE_A if has_a else SIDE_B
    return side, DEFAULT_CONVICTION, text.strip()


def assess(window: list[ChatMessage], q: ForecastQuestion) -> AssessedStance:
    """Assess one participant's recent dialog into (side, conviction, reasons).

    The most recent signal-bearing message fixes side and conviction; reasons
    are collected verbatim from every window message arguing that same side.
    With no signal anywhere in the window the stance is neutral.
    """
    authors = {m.author for m in window}
    if len(authors) > 1:
        raise ValueError(f"assessment window must have one author, got {authors}")
    as_of = max((m.seq for m in window), default=0)
    if not window:
        return AssessedStance.neutral("", 0)
    pid = window[0].author

    signals: list[tuple[str, float, str]] = []
    for msg in sorted(window, key=lambda m: m.seq):
        sig = _signal_in(msg.text, q)
        if sig:
            signals.append(sig)
    if not signals:
        return AssessedStance.neutral(pid, as_of)

    side, conviction, _ = signals[-1]
    reasons = tuple(r for s, _, r in signals if s == side and r)
    return AssessedStance(pid, side, conviction, reasons, as_of)


def stance_to_support(s: AssessedStance) -> SupportVector:
    """Map an assessed stance onto the four options.

    With conviction c, mass M = 0.5 + 0.5*c lands on the chosen side; the
    side's 20-point option takes M*c and its 10-point option M*(1-c), while
    each opposite option takes (1-M)/2. Neutral maps to the uniform vector.
    """
    if s.side == NEUTRAL:
        return SupportVector.uniform()
    c = s.conviction
    m = 0.5 + 0.5 * c
    hi, lo, off = m * c, m * (1.0 - c), (1.0 - m) / 2.0
    if s.side == SIDE_A:
        w = (hi, lo, off, off)
    else:
        w = (off, off, lo, hi)
    return SupportVector(w)


def smooth_update(prev: SupportVector, nxt: SupportVector, alpha: float) -> SupportVector:
    """Exponentially blend a new assessment into the running support vector."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    blended = [(1.0 - alpha) * p + alpha * n for p, n in zip(prev.w, nxt.w)]
    total = sum(blended)
    return SupportVector(tuple(x / total for x in blended))


def extract_insights(
    window: list[ChatMessage], q: ForecastQuestion
) -> list[Insight]:
    """Pull one insight per distinct (side, reason) raised in a subgroup window.

    Surrogate-authored messages are ignored; only organic dialog raises
    insights. Reason text may pack several reasons separated by ";".
    """
    subgroups = {m.subgroup_id for m in window}
    if len(subgroups) > 1:
        raise ValueError(f"insight window must span one subgroup, got {subgroups}")

    out: list[Insight] = []
    seen: set[str] = set()
    for msg in sorted(window, key=lambda m: m.seq):
        if msg.insight_id is not None:  # surrogate expression, not organic
            continue
        sig = _signal_in(msg.text, q)
        if sig is None:
            continue
        side, conviction, reason_text = sig
        for reason in (part.strip() for part in reason_text.split(";")):
            if not reason:
                continue
            key = canonical_key(side, (reason,))
            if key in seen:
                continue
            seen.add(key)
            out.append(
                Insight(
                    id=f"ins-{key[:8]}-{msg.subgroup_id}-{msg.seq}",
                    side=side,
                    reasons=(reason,),
                    conviction=conviction,
                    origin_subgroup=msg.subgroup_id,
                    canonical_key=key,
                )
            )
    return out


class MockAnalyzer:
    """Deterministic in-process analyzer; a pure function of its inputs."""

    def assess(self, window: list[ChatMessage], q: ForecastQuestion) -> AssessedStance:
        return assess(window, q)

    def extract_insights(
        self, window: list[ChatMessage], q: ForecastQuestion
    ) -> list[Insight]:
        return extract_insights(window, q)


SCHEMA_VERSION = 1


@dataclass
class HttpAnalyzer:
    """Chat-completions-style HTTP backend.

    POSTs {question, transcript, schema_version, task} and expects a strict
    response: task "stance" -> {side, conviction, reasons[]}, task "insights"
    -> {insights: [{side, conviction, reasons[]}]}. Anything else (transport
    failure, bad status, malformed body) raises BackendUnavailable; callers
    keep the prior stance or treat the window as insight-free.
    """

    url: str
    api_key: str = ""
    model: str = ""
    timeout: float = 10.0

    @classmethod
    def from_env(cls) -> "HttpAnalyzer":
        url = os.environ.get("ANALYZER_URL", "")
        if not url:
            raise BackendUnavailable("ANALYZER_URL is not set")
        return cls(
            url=url,
            api_key=os.environ.get("ANALYZER_KEY", ""),
            model=os.environ.get("ANALYZER_MODEL", ""),
        )

    def _post(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                if resp.status != 200:
                    raise BackendUnavailable(f"backend returned HTTP {resp.status}")
                return json.loads(resp.read().decode("utf-8"))
        except BackendUnavailable:
            raise
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise BackendUnavailable(str(exc)) from exc

    def _request(self, task: str, window: list[ChatMessage], q: ForecastQuestion) -> dict:
        return self._post(
            {
                "task": task,
                "schema_version": SCHEMA_VERSION,
                "model": self.model,
                "question": q.to_fixture(),
                "transcript": [
                    {"seq": m.seq, "author": m.author, "text": m.text} for m in window
                ],
            }
        )

    def assess(self, window: list[ChatMessage], q: ForecastQuestion) -> AssessedStance:
        doc = self._request("stance", window, q)
        stance = _parse_stance(doc)
        pid = window[0].author if window else ""
        as_of = max((m.seq for m in window), default=0)
        return AssessedStance(pid, stance[0], stance[1], stance[2], as_of)

    def extract_insights(
        self, window: list[ChatMessage], q: ForecastQuestion
    ) -> list[Insight]:
        doc = self._request("insights", window, q)
        items = doc.get("insights") if isinstance(doc, dict) else None
        if not isinstance(items, list):
            raise BackendUnavailable("response missing insights list")
        subgroup = window[0].subgroup_id if window else "?"
        top_seq = max((m.seq for m in window), default=0)
        out = []
        for i, item in enumerate(items):
            side, conviction, reasons = _parse_stance(item)
            if side == NEUTRAL or not reasons:
                continue
            key = canonical_key(side, reasons)
            out.append(
                Insight(
                    id=f"ins-{key[:8]}-{subgroup}-{top_seq}.{i}",
                    side=side,
                    reasons=reasons,
                    conviction=conviction,
                    origin_subgroup=subgroup,
                    canonical_key=key,
                )
            )
        return out


def _parse_stance(doc) -> tuple[str, float, tuple[str, ...]]:
    if not isinstance(doc, dict):
        raise BackendUnavailable("response body is not an object")
    side = doc.get("side")
    conviction = doc.get("conviction")
    reasons = doc.get("reasons")
    if side not in (SIDE_A, SIDE_B, NEUTRAL):
        raise BackendUnavailable(f"bad side {side!r}")
    if not isinstance(conviction, (int, float)) or not 0 <= conviction <= 1:
        raise BackendUnavailable(f"bad conviction {conviction!r}")
    if not isinstance(reasons, list) or not all(isinstance(r, str) for r in reasons):
        raise BackendUnavailable("bad reasons")
    return side, float(conviction), tuple(reasons)
