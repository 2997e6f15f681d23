"""Mining succinct IF-condition-THEN-update rules from process event logs
by minimizing a two-part MDL score."""

__version__ = "0.1.0"

from .codec import CodecConfig
from .logs import EventLog, Histogram, build_histogram, frequencies, import_xes, parse_csv
from .rules import (
    Condition,
    Model,
    Rule,
    UpdateRule,
    build_rule,
    count_dags,
    model_from_json,
    model_to_json,
    pretty_model,
)
from .scoring import decode, encode, total_score
from .search import MiningResult, SearchConfig, mine
from .synth import SynthConfig, add_swap_noise, generate_log, sample_ground_truth
from .evaluate import metrics, predict, split_by_traces

__all__ = [
    "CodecConfig",
    "Condition",
    "EventLog",
    "Histogram",
    "MiningResult",
    "Model",
    "Rule",
    "SearchConfig",
    "SynthConfig",
    "UpdateRule",
    "add_swap_noise",
    "build_histogram",
    "build_rule",
    "count_dags",
    "decode",
    "encode",
    "frequencies",
    "generate_log",
    "import_xes",
    "metrics",
    "mine",
    "model_from_json",
    "model_to_json",
    "parse_csv",
    "predict",
    "pretty_model",
    "sample_ground_truth",
    "split_by_traces",
    "total_score",
]
