"""Conversational surrogates: one per thinktank.

An agent watches its own subgroup's dialog (registering extracted insights
with the matching engine via the session core) and voices insights arriving
from other subgroups as ordinary chat, throttled so humans stay dominant in
the transcript.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analyzer import Insight, extract_insights
from .domain import ChatMessage, ForecastQuestion

DEFAULT_MIN_GAP_MS = 25_000

# Template family for expressing a routed insight. All variants name the
# team and carry every reason verbatim; the seed only varies the framing.
_TEMPLATES = (
    "Another group is leaning {team}: {reasons}.",
    "Heads up - one of the other thinktanks likes {team}. Their case: {reasons}.",
    "Passing along from another group: {team}, because {reasons}.",
    "Elsewhere in the session people are on {team}: {reasons}. What do we think?",
)


@dataclass
class AgentState:
    subgroup_id: str
    surrogate_id: str
    last_expression_time: int | None = None  # ms; None until first expression
    observed_through_seq: int = 0  # per-subgroup watermark
    expressions: int = 0


def observe(
    state: AgentState, new_messages: list[ChatMessage], q: ForecastQuestion
) -> list[Insight]:
    """Advance the watermark over fresh local messages and extract insights.

    Only participant-authored messages past the current watermark count, so
    re-observing an already-seen seq range yields nothing and the agent's own
    expressions never round-trip back into the registry.
    """
    fresh = [
        m
        for m in new_messages
        if m.seq > state.observed_through_seq
        and m.subgroup_id == state.subgroup_id
        and m.author != state.surrogate_id
    ]
    if not fresh:
        return []
    state.observed_through_seq = max(m.seq for m in fresh)
    return extract_insights(fresh, q)


def render_expression(insight: Insight, q: ForecastQuestion, template_seed: int) -> str:
    team = q.team_for(insight.side)
    reasons = "; ".join(insight.reasons)
    template = _TEMPLATES[template_seed % len(_TEMPLATES)]
    return template.format(team=team, reasons=reasons)


def express(
    state: AgentState,
    insight: Insight,
    q: ForecastQuestion,
    template_seed: int,
    seq: int,
    now_ms: int,
) -> ChatMessage:
    """Voice a routed insight as a chat message from the surrogate.

    The message is annotated with the insight id so exposure accounting and
    UI styling can resolve it back to the registry.
    """
    if insight.origin_subgroup == state.subgroup_id:
        raise ValueError(
            f"agent for {state.subgroup_id} asked to express a local insight"
        )
    state.last_expression_time = now_ms
    state.expressions += 1
    return ChatMessage(
        seq=seq,
        timestamp=now_ms,
        author=state.surrogate_id,
        subgroup_id=state.subgroup_id,
        text=render_expression(insight, q, template_seed),
        insight_id=insight.id,
    )


def pace_gate(state: AgentState, now_ms: int, min_gap_ms: int = DEFAULT_MIN_GAP_MS) -> bool:
    """True when the agent has been quiet long enough to speak again."""
    if state.last_expression_time is None:
        return True
    return now_ms - state.last_expression_time >= min_gap_ms
