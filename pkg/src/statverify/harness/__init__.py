from .config import ConfigError, ExperimentConfig, from_dict, load_config, parse_seeds
from .runner import load_or_compute_ground_truth, run_experiment, run_one
from .summary import load_tables, summarize

__all__ = ["ConfigError", "ExperimentConfig", "from_dict", "load_config", "parse_seeds",
           "load_or_compute_ground_truth", "run_experiment", "run_one", "load_tables", "summarize"]
