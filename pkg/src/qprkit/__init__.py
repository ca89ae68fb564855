"""qprkit: phase retrieval from k-level quantized intensity measurements.

The package covers the full pipeline: quantizer design over the squared-
normal intensity distribution, quantized (noisy) acquisition, consistent
rank-1 reconstruction by (accelerated) projected gradient descent,
distinguishability and noise-robustness analysis, and Fisher-information
benchmarking. ``qprkit.harness`` adds a seeded experiment runner and CLI.
"""

from . import analysis, crb, measurement, metrics, objective, quantizer, solvers, specfun
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DegeneratePairError,
    DomainError,
    QprError,
)

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "crb",
    "measurement",
    "metrics",
    "objective",
    "quantizer",
    "solvers",
    "specfun",
    "QprError",
    "DomainError",
    "ConfigError",
    "ConvergenceError",
    "DegeneratePairError",
    "DegenerateInputError",
]
