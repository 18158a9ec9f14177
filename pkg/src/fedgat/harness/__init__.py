from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, validate_config
from .runner import RunResult, SweepSpec, prepare_data, read_trend, run_experiment, run_sweep

__all__ = [
    "ConfigError", "ExperimentConfig", "RunResult", "SweepSpec", "config_from_dict", "load_config",
    "prepare_data", "read_trend", "run_experiment", "run_sweep", "validate_config",
]
