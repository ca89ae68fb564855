"""Consistency objective for quantized intensities and its relatives.

The reconstruction sought is a rank-1 lift X = x x^T whose linear
measurements Tr(a_i a_i^T X) fall inside the observed quantizer cells.
Cell membership is scored with a one-sided quadratic penalty, which makes
the objective convex in X with an explicit gradient. The two-sided squared
loss against the encoded symbols is also provided; it drives the lifted
least-squares baseline.

Both losses depend on X only through the m measurement traces, and traces
are linear in X. The cost objects therefore expose a trace-space interface
that the exact grid line search exploits: one trace evaluation per matrix,
then O(m) work per candidate step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .measurement import MeasurementEnsemble
from .quantizer import Quantizer

MatrixLike = "np.ndarray | LiftedEstimate"


def one_sided_square(u):
    """Penalty u^2/2 on the violated side (u <= 0), zero otherwise."""
    v = np.minimum(u, 0.0)
    return 0.5 * v * v


def one_sided_square_prime(u):
    """Derivative of :func:`one_sided_square`: u on u <= 0, zero otherwise."""
    return np.minimum(u, 0.0)


@dataclass(frozen=True)
class LiftedEstimate:
    """Rank-<=1 PSD matrix lam * v v^T stored in factored form."""

    lam: float
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "v", v)
        if self.lam < 0.0:
            raise DomainError(f"lam must be >= 0, got {self.lam}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise DomainError("v must be unit norm")

    def matrix(self) -> np.ndarray:
        return self.lam * np.outer(self.v, self.v)

    def vector(self) -> np.ndarray:
        """Signal estimate sqrt(lam) * v."""
        return math.sqrt(self.lam) * self.v

    @staticmethod
    def from_vector(x: np.ndarray) -> "LiftedEstimate":
        x = np.asarray(x, dtype=float)
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            e = np.zeros(x.size)
            e[0] = 1.0
            return LiftedEstimate(0.0, e)
        return LiftedEstimate(nrm * nrm, x / nrm)


@dataclass(frozen=True)
class BinPartition:
    """Per-measurement cell data derived from an observation.

    Stores, for each measurement i, the observed cell index and the cell
    interval [lower_i, upper_i] plus the encoding symbol. The level sets
    H_j = {i : bins_i = j} are recoverable via :meth:`indices_for_level`.
    """

    bins: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    symbol: np.ndarray
    levels: int

    @staticmethod
    def from_observation(q: Quantizer, bins: np.ndarray) -> "BinPartition":
        bins = np.asarray(bins, dtype=np.int64)
        if bins.min(initial=1) < 1 or bins.max(initial=1) > q.levels:
            raise DomainError("cell indices must lie in 1..k")
        return BinPartition(
            bins=bins,
            lower=q.lower_edges[bins - 1],
            upper=q.upper_edges[bins - 1],
            symbol=q.symbols[bins - 1],
            levels=q.levels,
        )

    @property
    def m(self) -> int:
        return self.bins.size

    def counts(self) -> np.ndarray:
        """m_j for j = 1..k; sums to m."""
        return np.bincount(self.bins, minlength=self.levels + 1)[1:]

    def indices_for_level(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.bins == j)


class _TraceCost:
    """Shared trace-space machinery for both losses."""

    def __init__(self, ensemble: MeasurementEnsemble, partition: BinPartition):
        if partition.m != ensemble.m:
            raise DomainError(
                f"partition covers {partition.m} measurements, ensemble has {ensemble.m}"
            )
        self.ensemble = ensemble
        self.partition = partition

    def traces(self, X) -> np.ndarray:
        if isinstance(X, LiftedEstimate):
            p = self.ensemble.projections(X.v)
            return X.lam * p * p
        return self.ensemble.traces_of(X)

    def value(self, X) -> float:
        return float(self.value_from_traces(self.traces(X)))

    def grad(self, X) -> np.ndarray:
        return self.ensemble.weighted_gram(self.grad_weights(self.traces(X)))

    # subclasses provide value_from_traces (broadcastable) and grad_weights


class ConsistencyCost(_TraceCost):
    """One-sided quadratic cell-membership cost.

    value(X) = sum_i f(upper_i - t_i) + f(t_i - lower_i) with t_i the i-th
    trace and f the one-sided square; it is zero exactly when every trace
    lies in its observed cell (the unbounded upper edge contributes zero).
    """

    def value_from_traces(self, t):
        # upper = +inf on saturation rows gives a +inf argument, hence zero
        # penalty, without a special case.
        return (
            one_sided_square(self.partition.upper - t)
            + one_sided_square(t - self.partition.lower)
        ).sum(axis=-1)

    def grad_weights(self, t):
        # dF/dt_i = f'(t - lower) - f'(upper - t)
        return one_sided_square_prime(t - self.partition.lower) - one_sided_square_prime(
            self.partition.upper - t
        )


class SquaredCost(_TraceCost):
    """Two-sided squared loss against the encoded symbols,
    value(X) = 1/2 sum_i (y_i - t_i)^2."""

    def value_from_traces(self, t):
        r = self.partition.symbol - t
        return 0.5 * (r * r).sum(axis=-1)

    def grad_weights(self, t):
        return t - self.partition.symbol


def consistency_cost(ensemble, q, bins, X) -> float:
    part = bins if isinstance(bins, BinPartition) else BinPartition.from_observation(q, bins)
    return ConsistencyCost(ensemble, part).value(X)


def consistency_grad(ensemble, q, bins, X) -> np.ndarray:
    part = bins if isinstance(bins, BinPartition) else BinPartition.from_observation(q, bins)
    return ConsistencyCost(ensemble, part).grad(X)


def squared_cost(ensemble, q, bins, X) -> float:
    part = bins if isinstance(bins, BinPartition) else BinPartition.from_observation(q, bins)
    return SquaredCost(ensemble, part).value(X)


def squared_grad(ensemble, q, bins, X) -> np.ndarray:
    part = bins if isinstance(bins, BinPartition) else BinPartition.from_observation(q, bins)
    return SquaredCost(ensemble, part).grad(X)


@dataclass(frozen=True)
class LineSearchGrid:
    """Uniform step-size grid {lo, lo+step, ..., hi}."""

    lo: float = 0.0
    hi: float = 0.005
    step: float = 1e-5

    def __post_init__(self):
        if self.lo < 0.0 or self.hi < self.lo or self.step <= 0.0:
            raise ConfigError(f"invalid line-search grid ({self.lo}, {self.hi}, {self.step})")

    def values(self) -> np.ndarray:
        count = int(round((self.hi - self.lo) / self.step)) + 1
        return np.linspace(self.lo, self.hi, count)


def grid_line_search(costfn, X, G, grid: LineSearchGrid) -> float:
    """Exact line search: the grid point minimizing cost(X - eta G).

    The candidate points are evaluated as given, without any projection.
    Ties resolve to the smaller step, so a zero step is returned whenever
    nothing on the grid improves the cost (e.g. G = 0).

    ``costfn`` may be a plain callable on matrices; cost objects exposing
    the trace-space interface are evaluated in O(m) per grid point.
    """
    etas = grid.values()
    if hasattr(costfn, "traces") and hasattr(costfn, "value_from_traces"):
        tx = costfn.traces(X)
        tg = costfn.traces(G)
        values = costfn.value_from_traces(tx[None, :] - etas[:, None] * tg[None, :])
    else:
        Xd = X.matrix() if isinstance(X, LiftedEstimate) else np.asarray(X, dtype=float)
        values = np.array([costfn(Xd - eta * G) for eta in etas])
    return float(etas[int(np.argmin(values))])


def grad_lipschitz_bound(ensemble: MeasurementEnsemble) -> float:
    """Global Lipschitz constant 2 sum_i |a_i|^4 for the consistency gradient."""
    sq = (ensemble.rows * ensemble.rows).sum(axis=1)
    return 2.0 * float((sq * sq).sum())
