"""When do two signals collide in quantized intensity space?

Two unit signals with correlation rho produce intensity gaps controlled by
a rank-2 matrix whose nonzero eigenvalues are +-sqrt(1 - rho^2). From that
structure follow closed-form bounds on the probability that one quantized
measurement fails to separate the pair (same cell, or joint saturation), a
minimum measurement count for a target failure rate, a Monte-Carlo noise
robustness estimate, and evaluable upper/lower envelopes of the
consistency cost in terms of the estimate-truth correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePairError, DomainError
from .measurement import intensities
from .objective import BinPartition, ConsistencyCost, SquaredCost
from .quantizer import Quantizer, encode, precision, squared_precision
from .specfun import adaptive_simpson, bessel_k0, chi2_1_cdf

_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class PairGeometry:
    """Spectral frame of the difference of two rank-1 lifts.

    ``frame`` is orthonormal with its first two columns spanning the plane
    where x1 x1^T - x2 x2^T acts; the corresponding eigenvalues are +nu1
    and -nu1 with nu1^2 = 1 - rho^2.
    """

    rho: float
    nu1: float
    frame: np.ndarray


def pair_geometry(x1: np.ndarray, x2: np.ndarray) -> PairGeometry:
    """Eigenstructure of V = x1 x1^T - x2 x2^T for unit, non-collinear inputs."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    for x in (x1, x2):
        if abs(np.linalg.norm(x) - 1.0) > 1e-8:
            raise DomainError("pair_geometry requires unit-norm inputs")
    rho = float(abs(x1 @ x2))
    if rho >= 1.0 - 1e-12:
        raise DegeneratePairError(f"signals are (numerically) collinear, rho = {rho}")
    V = np.outer(x1, x1) - np.outer(x2, x2)
    w, U = np.linalg.eigh(V)  # ascending: w[0] = -nu1, w[-1] = +nu1
    nu1 = float(w[-1])
    order = np.concatenate([[w.size - 1, 0], np.arange(1, w.size - 1)])
    return PairGeometry(rho=rho, nu1=nu1, frame=U[:, order])


def gap_prob_exact(delta_prime: float) -> float:
    """(2/pi) integral_0^{delta'} K0(u) du, the kernel-integral bound on one
    measurement failing to separate a signal pair.

    The integrable log singularity at 0 is handled analytically on a short
    leading piece; the remainder uses adaptive Simpson quadrature.
    """
    if delta_prime < 0.0:
        raise DomainError(f"delta_prime must be >= 0, got {delta_prime}")
    if delta_prime == 0.0:
        return 0.0
    eps = min(1e-3, delta_prime)
    # int_0^eps K0 = eps (1 - gamma - ln(eps/2)) + O(eps^3 ln eps)
    val = eps * (1.0 - _EULER_GAMMA - math.log(0.5 * eps))
    if delta_prime > eps:
        upper = min(delta_prime, 40.0)  # K0 below 1e-17 beyond this
        val += adaptive_simpson(bessel_k0, eps, upper, tol=1e-11)
    return min(1.0, (2.0 / math.pi) * val)


def gap_prob_approx(delta_prime: float) -> float:
    """Closed-form fit 1 - exp(-1.6 delta') to :func:`gap_prob_exact`."""
    if delta_prime < 0.0:
        raise DomainError(f"delta_prime must be >= 0, got {delta_prime}")
    return 1.0 - math.exp(-1.6 * delta_prime)


def same_cell_bound(delta: float, rho: float) -> float:
    """Bound on both measurements of a rho-correlated pair landing within one
    cell width: gap_prob_approx(delta / sqrt(1 - rho^2))."""
    if not 0.0 <= rho < 1.0:
        raise DegeneratePairError(f"rho must lie in [0, 1), got {rho}")
    if delta < 0.0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    return gap_prob_approx(delta / math.sqrt(1.0 - rho * rho))


def saturation_bound(tau_penultimate: float) -> float:
    """Bound on joint saturation: the upper tail mass beyond the last
    finite threshold."""
    if tau_penultimate < 0.0:
        raise DomainError(f"tau must be >= 0, got {tau_penultimate}")
    return 1.0 - chi2_1_cdf(tau_penultimate)


@dataclass(frozen=True)
class DistinguishabilityReport:
    same_cell: float
    saturation: float
    pe_max: float
    vacuous: bool  # the combined bound exceeds 1, so it carries no information
    m_min: Optional[int] = None


def collision_bound(delta: float, tau_penultimate: float, rho: float,
                    eps: Optional[float] = None) -> DistinguishabilityReport:
    """Combined single-measurement indistinguishability bound
    pe_max = same_cell + saturation, and the measurement count needed to
    push the m-measurement failure probability below ``eps``."""
    p1 = same_cell_bound(delta, rho)
    p2 = saturation_bound(tau_penultimate)
    pe = p1 + p2
    vacuous = pe >= 1.0
    m_min = None
    if eps is not None and not vacuous:
        m_min = min_measurements(pe, eps)
    return DistinguishabilityReport(p1, p2, pe, vacuous, m_min)


def collision_bound_for(q: Quantizer, rho: float, eps: Optional[float] = None):
    """:func:`collision_bound` evaluated at a quantizer's precision and last
    finite threshold."""
    return collision_bound(precision(q), float(q.thresholds[-1]), rho, eps)


def min_measurements(pe: float, eps: float) -> int:
    """Smallest m with pe^m <= eps, i.e. ceil(log eps / log pe)."""
    if not 0.0 < pe < 1.0:
        raise DomainError(f"pe must lie in (0, 1), got {pe}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return int(math.ceil(math.log(eps) / math.log(pe)))


def noise_robustness_mc(
    q: Quantizer, sigma_xi_sq: float, n_trials: int, seed=None
) -> float:
    """Monte-Carlo estimate of P(Q(b) = Q(b + xi)) with b squared standard
    normal and xi ~ N(0, sigma_xi_sq)."""
    if n_trials < 1:
        raise DomainError(f"n_trials must be >= 1, got {n_trials}")
    if sigma_xi_sq < 0.0:
        raise DomainError(f"sigma_xi_sq must be >= 0, got {sigma_xi_sq}")
    if sigma_xi_sq == 0.0:
        return 1.0
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(n_trials) ** 2
    xi = rng.normal(0.0, math.sqrt(sigma_xi_sq), n_trials)
    return float(np.mean(encode(q, b) == encode(q, b + xi)))


@dataclass(frozen=True)
class CostBoundsReport:
    """Evaluated envelope expressions for one estimate/truth pair.

    The bound expressions are only claimed when ``traces_bounded`` is true,
    i.e. every lifted trace of the estimate and of the truth lies in
    [0, d0]; ``bounded_prob`` is the a-priori probability of that event.
    """

    cost_value: float  # one-sided consistency cost F
    squared_value: float  # two-sided symbol loss Q
    two_sided_gap: float  # Q - F  (nonnegative for interior symbols)
    gap_upper: float  # bound on Q - F under bounded traces
    cost_upper: float  # bound on F under bounded traces
    cost_lower: float  # lower envelope of F under bounded traces
    rho_x: float
    traces_bounded: bool
    bounded_prob: float
    d0: float


def cost_bounds_report(ensemble, q: Quantizer, bins, x_star, x, d0: float) -> CostBoundsReport:
    """Evaluate the cost sandwich for X = x x^T against a noiseless
    observation of ``x_star``; requires d0 >= tau_{k-1}."""
    tau_pen = float(q.thresholds[-1])
    if d0 < tau_pen:
        raise DomainError(f"d0 must be >= the last finite threshold {tau_pen}, got {d0}")
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    part = BinPartition.from_observation(q, bins)
    f_val = ConsistencyCost(ensemble, part).value(np.outer(x, x))
    q_val = SquaredCost(ensemble, part).value(np.outer(x, x))
    delta = precision(q)
    delta_sq = squared_precision(q)
    m = ensemble.m
    rho_x = float(abs(x_star @ x))
    sat = d0 - tau_pen
    gap_upper = 0.5 * m * max(delta * delta + 2.0 * delta * d0, delta_sq)
    if rho_x >= 1.0 - 1e-12:
        plane_sq_sum = plane_diff_sum = plane_abs_sum = 0.0
        one_minus = 0.0
    else:
        geom = pair_geometry(x_star, x)
        tilde = ensemble.rows @ geom.frame[:, :2]
        a1s = tilde[:, 0] ** 2
        a2s = tilde[:, 1] ** 2
        plane_sq_sum = float(((a1s + a2s) ** 2).sum())
        plane_diff_sum = float(((a1s - a2s) ** 2).sum())
        plane_abs_sum = float((a1s + a2s).sum())
        one_minus = 1.0 - rho_x * rho_x
    cost_upper = 0.5 * m * max(delta * delta, sat * sat) + one_minus * plane_sq_sum
    cost_lower = (
        0.5 * one_minus * plane_diff_sum
        - math.sqrt(one_minus) * max(delta, sat) * plane_abs_sum
        - gap_upper
    )
    t_x = intensities(ensemble, x)
    t_star = intensities(ensemble, x_star)
    bounded = bool(t_x.max() <= d0 and t_star.max() <= d0)
    p_bdd = chi2_1_cdf(d0) ** m
    return CostBoundsReport(
        cost_value=f_val,
        squared_value=q_val,
        two_sided_gap=q_val - f_val,
        gap_upper=gap_upper,
        cost_upper=cost_upper,
        cost_lower=cost_lower,
        rho_x=rho_x,
        traces_bounded=bounded,
        bounded_prob=p_bdd,
        d0=d0,
    )


def write_bounds_csv(path, deltas, rhos, tau_penultimate: float, eps: float) -> None:
    """Sweep table with header ``delta,rho,pe1,pe2,pe_max,m_min``.

    Vacuous rows (pe_max >= 1) keep their probability columns and leave
    m_min empty.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta,rho,pe1,pe2,pe_max,m_min\n")
        for rho in rhos:
            for delta in deltas:
                rep = collision_bound(delta, tau_penultimate, rho, eps)
                m_min = "" if rep.m_min is None else str(rep.m_min)
                fh.write(
                    f"{delta:.17g},{rho:.17g},{rep.same_cell:.17g},"
                    f"{rep.saturation:.17g},{rep.pe_max:.17g},{m_min}\n"
                )
