"""Config-driven experiment harness and command-line interface."""

from .config import ConfigError, ExperimentConfig, load_config
from .runner import ResultTable, run_experiment
from .plotdata import emit_plot_data

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "ResultTable",
    "run_experiment",
    "emit_plot_data",
]
