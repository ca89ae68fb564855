"""Scalar quantizer for chi-square distributed intensity measurements.

A k-level quantizer is a strictly increasing set of finite thresholds
tau_1 < ... < tau_{k-1} (with implicit edges tau_0 = 0 and tau_k = +inf)
and one encoding symbol per cell, each symbol interior to its cell. Two
design procedures are provided: equiprobable cells (thresholds at
quantiles of the intensity distribution) and Lloyd-Max (centroid /
midpoint fixed point, which maximizes quantization SNR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DomainError
from .specfun import adaptive_simpson, chi2_1_cdf, chi2_1_inv_cdf

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Offset factors for the symbol of the unbounded saturation cell,
# s_k = tau_{k-1} + factor * precision. The wide placement is the default;
# the narrow one is kept selectable because both conventions are in use.
SATURATION_WIDE = 2.0
SATURATION_NARROW = 0.5


@dataclass(frozen=True)
class Quantizer:
    """Immutable k-level scalar quantizer.

    ``thresholds`` holds the finite cell edges tau_1..tau_{k-1}; the outer
    edges 0 and +inf are implicit. ``symbols`` holds s_1..s_k.
    """

    thresholds: np.ndarray
    symbols: np.ndarray

    def __post_init__(self):
        thr = np.asarray(self.thresholds, dtype=float)
        sym = np.asarray(self.symbols, dtype=float)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "symbols", sym)
        if sym.size < 2:
            raise ConfigError("a quantizer needs at least 2 levels")
        if thr.size != sym.size - 1:
            raise ConfigError(
                f"{sym.size} symbols require {sym.size - 1} thresholds, got {thr.size}"
            )
        edges = np.concatenate([[0.0], thr])
        if not np.all(np.diff(edges) > 0.0) or not np.all(np.isfinite(thr)):
            raise ConfigError("thresholds must be finite and satisfy 0 < tau_1 < ... < tau_{k-1}")
        interior = np.all(sym[:-1] > edges[:-1]) and np.all(sym[:-1] < thr)
        if not interior or not sym[-1] > thr[-1]:
            raise ConfigError("each symbol must lie inside its cell: tau_{j-1} < s_j < tau_j")

    @property
    def levels(self) -> int:
        return self.symbols.size

    @property
    def lower_edges(self) -> np.ndarray:
        """tau_0..tau_{k-1} (first entry 0)."""
        return np.concatenate([[0.0], self.thresholds])

    @property
    def upper_edges(self) -> np.ndarray:
        """tau_1..tau_k (last entry +inf)."""
        return np.concatenate([self.thresholds, [np.inf]])


def encode(q: Quantizer, u):
    """Cell index in 1..k for value(s) ``u``.

    Cells are left-closed: u in [tau_{j-1}, tau_j) maps to j. Values below
    zero (possible when noise is added before quantization) fall in cell 1,
    i.e. the first cell extends to -inf.
    """
    idx = np.searchsorted(q.thresholds, u, side="right") + 1
    return int(idx) if np.isscalar(u) else idx


def decode(q: Quantizer, bins) -> np.ndarray:
    """Symbol value(s) for cell index(es) in 1..k."""
    return q.symbols[np.asarray(bins) - 1]


def precision(q: Quantizer) -> float:
    """Largest width among the bounded cells, max_j (tau_j - tau_{j-1})."""
    return float(np.diff(q.lower_edges).max())


def squared_precision(q: Quantizer) -> float:
    """max_j (s_j^2 - tau_{j-1}^2) over all k cells, saturation included."""
    return float((q.symbols**2 - q.lower_edges**2).max())


def design_equiprobable(k: int, saturation_offset: float = SATURATION_WIDE) -> Quantizer:
    """Quantizer whose cells each carry probability 1/k under the
    squared-normal intensity distribution.

    Thresholds sit at the j/k quantiles; bounded cells encode to their
    midpoints and the saturation cell to tau_{k-1} + saturation_offset * delta
    where delta is the precision of the design.
    """
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise ConfigError(f"k must be an integer >= 2, got {k!r}")
    thr = np.array([chi2_1_inv_cdf(j / k) for j in range(1, k)])
    edges = np.concatenate([[0.0], thr])
    delta = float(np.diff(edges).max()) if k > 2 else float(thr[0])
    symbols = np.empty(k)
    symbols[: k - 1] = 0.5 * (edges[: k - 1] + thr)
    symbols[k - 1] = thr[-1] + saturation_offset * delta
    return Quantizer(thr, symbols)


def _cell_centroid(lo: float, hi: float, cap: float) -> float:
    """Mean intensity conditional on the cell [lo, hi).

    Uses the substitution b = t^2, which turns the integrand into the smooth
    t^2 exp(-t^2/2)/sqrt(2 pi) and removes the inverse-sqrt singularity at 0.
    The unbounded cell is truncated at ``cap``.
    """
    s = math.sqrt(lo)
    t = math.sqrt(min(hi, cap))
    num = 2.0 * adaptive_simpson(
        lambda v: v * v * math.exp(-0.5 * v * v) / _SQRT_2PI, s, t, tol=1e-12
    )
    den = chi2_1_cdf(min(hi, cap)) - chi2_1_cdf(lo)
    return num / den


@dataclass(frozen=True)
class LloydMaxResult:
    quantizer: Quantizer
    iterations: int
    last_movement: float
    history: list = field(default_factory=list)


def design_lloyd_max(
    k: int,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    keep_history: bool = False,
) -> LloydMaxResult:
    """Lloyd-Max quantizer for the squared-normal intensity distribution.

    Alternates symbol updates (cell centroids, by quadrature) and threshold
    updates (midpoints of adjacent symbols) from the equiprobable design
    until the largest threshold movement falls below ``tol``.

    Raises :class:`ConvergenceError` carrying the last iterate if the fixed
    point is not reached within ``max_iter`` sweeps.
    """
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise ConfigError(f"k must be an integer >= 2, got {k!r}")
    if not tol > 0.0:
        raise ConfigError(f"tol must be positive, got {tol}")
    cap = chi2_1_inv_cdf(1.0 - 1e-10)
    thr = design_equiprobable(k).thresholds.copy()
    history = []
    movement = math.inf
    for it in range(1, max_iter + 1):
        edges = np.concatenate([[0.0], thr, [np.inf]])
        symbols = np.array([_cell_centroid(edges[j], edges[j + 1], cap) for j in range(k)])
        new_thr = 0.5 * (symbols[:-1] + symbols[1:])
        movement = float(np.abs(new_thr - thr).max())
        thr = new_thr
        if keep_history:
            history.append(Quantizer(thr.copy(), symbols.copy()))
        if movement < tol:
            edges = np.concatenate([[0.0], thr, [np.inf]])
            symbols = np.array([_cell_centroid(edges[j], edges[j + 1], cap) for j in range(k)])
            return LloydMaxResult(Quantizer(thr, symbols), it, movement, history)
    raise ConvergenceError(
        f"Lloyd-Max did not converge in {max_iter} iterations (movement {movement:.3e})",
        residual=movement,
        iterations=max_iter,
        last=Quantizer(thr, symbols),
    )


def quantization_snr(q: Quantizer, b) -> float:
    """Signal-to-distortion ratio 10 log10(sum b^2 / sum (b - Q(b))^2) in dB.

    Returns +inf when every sample coincides with its encoding symbol.
    """
    b = np.asarray(b, dtype=float)
    if b.size == 0:
        raise DomainError("quantization_snr requires at least one sample")
    err = b - decode(q, encode(q, b))
    distortion = float(err @ err)
    if distortion == 0.0:
        return math.inf
    return 10.0 * math.log10(float(b @ b) / distortion)


def save_quantizer(q: Quantizer, path) -> None:
    """Write the three-line text record: k, thresholds, symbols (17 digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{q.levels}\n")
        fh.write(" ".join(f"{t:.17g}" for t in q.thresholds) + "\n")
        fh.write(" ".join(f"{s:.17g}" for s in q.symbols) + "\n")


def load_quantizer(path) -> Quantizer:
    """Read a quantizer record written by :func:`save_quantizer`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if len(lines) != 3:
        raise ConfigError(f"quantizer record must have 3 lines, found {len(lines)}")
    k = int(lines[0])
    thr = np.array([float(v) for v in lines[1].split()])
    sym = np.array([float(v) for v in lines[2].split()])
    if sym.size != k:
        raise ConfigError(f"record declares k={k} but has {sym.size} symbols")
    return Quantizer(thr, sym)
