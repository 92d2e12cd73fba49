"""Decompose aggregate stance change into group-proportion and group-stance drivers."""

from .corpus_filter import Reason, RawComment, apply_exclusions, filter_stream, match_keywords
from .counterfactual import (
    DriverReport,
    Mode,
    ScenarioSpec,
    evaluate_scenario,
    proportion_only,
    rank_drivers,
    stance_only,
)
from .metrics import SimilarityReport, compare, dtw, euclidean, l1_loss, pearson
from .panel import (
    CommentEvent,
    ContractViolation,
    Panel,
    Stance,
    assign_cohorts,
    build_panel,
    overall_series,
    time_averages,
)
from .timeseries import Quarter, TimeSeries, to_quarter

__version__ = "0.1.0"

__all__ = [
    "Reason",
    "RawComment",
    "apply_exclusions",
    "filter_stream",
    "match_keywords",
    "DriverReport",
    "Mode",
    "ScenarioSpec",
    "evaluate_scenario",
    "proportion_only",
    "rank_drivers",
    "stance_only",
    "SimilarityReport",
    "compare",
    "dtw",
    "euclidean",
    "l1_loss",
    "pearson",
    "CommentEvent",
    "ContractViolation",
    "Panel",
    "Stance",
    "assign_cohorts",
    "build_panel",
    "overall_series",
    "time_averages",
    "Quarter",
    "TimeSeries",
    "to_quarter",
]
