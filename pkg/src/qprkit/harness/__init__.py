"""Experiment harness: seeded experiment runner, CSV reports, figures, CLI."""

from .config import ExperimentConfig, load_config_file
from .runner import (
    analysis_tables,
    crb_sweep,
    design_quant,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "load_config_file",
    "run_experiment",
    "crb_sweep",
    "analysis_tables",
    "design_quant",
]
