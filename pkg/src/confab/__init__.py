"""Real-time group deliberation with AI surrogate agents linking chat subgroups."""

__version__ = "0.1.0"

from .domain import (
    ChatMessage,
    ForecastOption,
    ForecastQuestion,
    Participant,
    Thinktank,
    canonical_options,
    partition_participants,
    question_from_fixture,
    validate_question,
)
from .analyzer import (
    AssessedStance,
    Insight,
    MockAnalyzer,
    SupportVector,
    assess,
    extract_insights,
    smooth_update,
    stance_to_support,
)
from .matching import MatchingEngine
from .sentiment import (
    ScopeSchedule,
    SentimentSeries,
    SupportSnapshot,
    aggregate,
    region_of,
    scope_at,
    weighted_mean,
)
from .forecast import CollectiveForecast, finalize
from .session import SessionConfig, SessionEngine
from .simharness import ScenarioSpec, generate_population, run_scenario
from .replay import fold_replay, reexecute
