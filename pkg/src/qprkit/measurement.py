"""Ground truths, Gaussian sampling ensembles and quantized acquisition.

All randomness flows through ``numpy.random.default_rng`` (PCG64), seeded
explicitly, so every generator is a pure function of its dimensions and
seed. Rank-1 structure is exploited throughout: the m sensing outer
products a_i a_i^T are never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .quantizer import Quantizer, encode

SeedLike = int | list | tuple | None


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Stack of m sensing vectors of dimension n with i.i.d. N(0,1) entries."""

    rows: np.ndarray
    seed: SeedLike = None

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=float))
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ConfigError(f"ensemble rows must be a (m, n) matrix, got shape {rows.shape}")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def projections(self, x: np.ndarray) -> np.ndarray:
        """a_i^T x for every row."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"vector of dimension {self.n} expected, got shape {x.shape}")
        return self.rows @ x

    def traces_of(self, X: np.ndarray) -> np.ndarray:
        """a_i^T X a_i for a dense symmetric matrix, computed row-wise."""
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.n):
            raise DomainError(f"matrix of shape ({self.n}, {self.n}) expected, got {X.shape}")
        return ((self.rows @ X) * self.rows).sum(axis=1)

    def weighted_gram(self, w: np.ndarray) -> np.ndarray:
        """sum_i w_i a_i a_i^T as a dense symmetric matrix."""
        G = (self.rows * np.asarray(w)[:, None]).T @ self.rows
        return 0.5 * (G + G.T)


def gaussian_ensemble(m: int, n: int, seed: SeedLike = None) -> MeasurementEnsemble:
    """Draw an m x n ensemble with i.i.d. standard normal entries."""
    if m < 1 or n < 1:
        raise ConfigError(f"ensemble dimensions must be positive, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    return MeasurementEnsemble(rng.standard_normal((m, n)), seed)


@dataclass(frozen=True)
class GroundTruth:
    """Unit-norm real signal, optionally with a known support size."""

    x: np.ndarray
    sparsity: Optional[int] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        norm = np.linalg.norm(x)
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"ground truth must be unit norm, |x| = {norm!r}")
        if self.sparsity is not None and np.count_nonzero(x) != self.sparsity:
            raise ConfigError(
                f"declared sparsity {self.sparsity} but {np.count_nonzero(x)} nonzeros"
            )

    @property
    def n(self) -> int:
        return self.x.size


def gen_two_sinusoid(n: int) -> GroundTruth:
    """Deterministic two-tone test signal, normalized to unit norm:
    x_l ~ 1.5 sin(4 pi (l-1)/n) + 2.5 cos(14 pi (l-1)/n), l = 1..n."""
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    idx = np.arange(n, dtype=float)
    x = 1.5 * np.sin(4.0 * np.pi * idx / n) + 2.5 * np.cos(14.0 * np.pi * idx / n)
    return GroundTruth(x / np.linalg.norm(x))


def gen_unit_sphere(n: int, seed: SeedLike = None) -> GroundTruth:
    """Uniform draw on the unit sphere via a normalized Gaussian vector."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    return GroundTruth(x / np.linalg.norm(x))


def gen_sparse(n: int, s: int, seed: SeedLike = None) -> GroundTruth:
    """Exactly s-sparse unit vector: support uniform over the n-choose-s
    possibilities, nonzero part uniform on the sphere in R^s."""
    if not 1 <= s <= n:
        raise ConfigError(f"sparsity must satisfy 1 <= s <= n, got s={s}, n={n}")
    rng = np.random.default_rng(seed)
    support = rng.choice(n, size=s, replace=False)
    mags = rng.standard_normal(s)
    mags /= np.linalg.norm(mags)
    x = np.zeros(n)
    x[support] = mags
    return GroundTruth(x, sparsity=s)


def intensities(ensemble: MeasurementEnsemble, x: np.ndarray) -> np.ndarray:
    """Quadratic measurements (a_i^T x)^2 for every row of the ensemble."""
    p = ensemble.projections(x)
    return p * p


def lifted_traces(ensemble: MeasurementEnsemble, X: np.ndarray) -> np.ndarray:
    """Linear measurements Tr(a_i a_i^T X) of a symmetric matrix.

    For X = x x^T this coincides with :func:`intensities`.
    """
    return ensemble.traces_of(X)


@dataclass(frozen=True)
class QuantizedObservation:
    """Observed cell indices together with the quantizer that produced them."""

    bins: np.ndarray
    quantizer: Quantizer
    sigma_xi: float = 0.0

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.int64)
        object.__setattr__(self, "bins", bins)
        if bins.min(initial=1) < 1 or bins.max(initial=1) > self.quantizer.levels:
            raise DomainError("cell indices must lie in 1..k")

    @property
    def m(self) -> int:
        return self.bins.size

    @property
    def symbols(self) -> np.ndarray:
        """Encoded symbol value for every measurement."""
        return self.quantizer.symbols[self.bins - 1]


def acquire(
    ensemble: MeasurementEnsemble,
    x_star: np.ndarray,
    q: Quantizer,
    sigma_xi: float = 0.0,
    seed: SeedLike = None,
) -> QuantizedObservation:
    """Quantized (optionally noisy) acquisition y_i = Q((a_i^T x*)^2 + xi_i).

    ``xi_i`` are i.i.d. N(0, sigma_xi^2) drawn from ``seed``; sigma_xi = 0
    reproduces the noiseless pipeline exactly.
    """
    if sigma_xi < 0.0:
        raise DomainError(f"sigma_xi must be >= 0, got {sigma_xi}")
    b = intensities(ensemble, x_star)
    if sigma_xi > 0.0:
        rng = np.random.default_rng(seed)
        b = b + rng.normal(0.0, sigma_xi, size=b.size)
    return QuantizedObservation(encode(q, b), q, sigma_xi)


def write_observation_csv(obs: QuantizedObservation, path) -> None:
    """CSV export with header ``index,bin,symbol``."""
    sym = obs.symbols
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,bin,symbol\n")
        for i, (b, s) in enumerate(zip(obs.bins, sym)):
            fh.write(f"{i},{b},{s:.17g}\n")


def write_ensemble_text(ensemble: MeasurementEnsemble, path) -> None:
    """Plain-text row-major matrix dump, 17 significant digits per entry."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in ensemble.rows:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
