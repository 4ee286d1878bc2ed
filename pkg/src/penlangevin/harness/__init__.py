from .config import ConfigError, ExperimentConfig, FilterSpec, LambdaRule, NoiseSpec, method_key
from .metrics import BEFORE_FILTER, MetricsRow, Score, add_noise, root_mean_square_error, score, summarize
from .pipeline import ExperimentResult, report, run_experiment, run_replicate, simulate_replicate, stream

__all__ = [
    "BEFORE_FILTER", "ConfigError", "ExperimentConfig", "ExperimentResult", "FilterSpec", "LambdaRule",
    "MetricsRow", "NoiseSpec", "Score", "add_noise", "method_key", "report", "root_mean_square_error",
    "run_experiment", "run_replicate", "score", "simulate_replicate", "stream", "summarize",
]
