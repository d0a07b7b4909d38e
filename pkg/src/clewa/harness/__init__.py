from clewa.harness.config import ConfigError, ExperimentConfig, LearnerSpec, load_config, parse_config
from clewa.harness.runner import (
    InvariantViolation,
    SummaryRow,
    fit_and_report,
    play,
    run_experiment,
    run_single,
)

__all__ = [
    "ConfigError", "ExperimentConfig", "LearnerSpec", "load_config", "parse_config",
    "InvariantViolation", "SummaryRow", "fit_and_report", "play", "run_experiment", "run_single",
]
