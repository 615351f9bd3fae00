"""Experiment configuration, sweep orchestration and the command line."""
from .config import ExperimentConfig, load_config, parse_config
from .sweep import SweepReport, run_sweep, theorem_check, write_report

__all__ = [
    "ExperimentConfig",
    "SweepReport",
    "load_config",
    "parse_config",
    "run_sweep",
    "theorem_check",
    "write_report",
]
