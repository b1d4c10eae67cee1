"""Config-driven experiment commands behind the ``spd-lab`` CLI."""

from .config import ConfigError, ExperimentConfig, load_config, packaged_config, parse_config
from .experiments import COMMANDS, run_command

__all__ = ["COMMANDS", "ConfigError", "ExperimentConfig", "load_config", "packaged_config",
           "parse_config", "run_command"]
