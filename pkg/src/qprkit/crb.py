"""Fisher information and Cramer-Rao bound for noisy quantized intensities.

The observation model is y_i = Q((a_i^T x)^2 + xi_i) with xi_i Gaussian and
the sensing rows held fixed. Each measurement's expected log-likelihood
curvature reduces to a k-term sum over the quantizer cells evaluated with
the *noise* cell convention (first edge -inf, last edge +inf), from which
the Fisher matrix is a weighted Gram matrix of the sensing rows. The CRB
scalar reported is the trace of the eigenvalue pseudo-inverse, with a
relative cutoff that also flags near rank deficiency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError
from .measurement import MeasurementEnsemble
from .quantizer import Quantizer
from .specfun import erf, erfc

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_DEN_FLOOR = 1e-300  # cells with less probability than this are skipped


def _normal_cdf_diff(a: float, b: float) -> float:
    """Phi(b) - Phi(a) for a <= b, standard normal, stable in both tails."""
    s = 1.0 / math.sqrt(2.0)
    if a > 0.0:  # both positive: difference of complements
        return 0.5 * (erfc(a * s) - erfc(b * s))
    if b < 0.0:  # both negative: mirror
        return 0.5 * (erfc(-b * s) - erfc(-a * s))
    return 0.5 * (erf(b * s) - erf(a * s))


def _normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT_2PI if abs(z) < 39.0 else 0.0


@dataclass(frozen=True)
class CurvatureTerms:
    value: float
    skipped: int  # cells dropped because their probability underflowed


def expected_curvature(u: float, q: Quantizer, sigma: float) -> CurvatureTerms:
    """Expected second derivative (in u) of the log-likelihood of one
    quantized noisy measurement at trace value u^2:

        -4 u^2 sum_j [phi'(tau_j) - phi'(tau_{j-1})]^2 / [phi(tau_j) - phi(tau_{j-1})]

    with phi(tau) = Phi((tau - u^2)/sigma) and the outer edges taken at
    +-inf. Always nonpositive.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    k = q.levels
    # noise-model cell edges: tau_0 = -inf, tau_k = +inf
    z = (q.thresholds - u * u) / sigma
    s = 1.0 / math.sqrt(2.0)
    total = 0.0
    skipped = 0
    pdf_prev = 0.0  # density vanishes at the -inf edge
    for j in range(1, k + 1):
        pdf_next = _normal_pdf(z[j - 1]) / sigma if j < k else 0.0
        if j == 1:
            den = 0.5 * erfc(-z[0] * s)  # Phi(z_1)
        elif j == k:
            den = 0.5 * erfc(z[k - 2] * s)  # 1 - Phi(z_{k-1})
        else:
            den = _normal_cdf_diff(z[j - 2], z[j - 1])
        num = pdf_next - pdf_prev
        if den > _DEN_FLOOR:
            total += num * num / den
        else:
            skipped += 1
        pdf_prev = pdf_next
    return CurvatureTerms(value=-4.0 * u * u * total, skipped=skipped)


@dataclass(frozen=True)
class CrbResult:
    fim: np.ndarray
    crb_trace: float
    rank_deficient: bool
    eigen_cutoff_used: float
    skipped_terms: int = 0


def fisher_matrix(
    ensemble: MeasurementEnsemble, x_star: np.ndarray, q: Quantizer, sigma: float
) -> CrbResult:
    """Fisher information sum_i [-curvature(u_i)] a_i a_i^T for a fixed
    ensemble; the CRB fields are filled in by :func:`crb_result`."""
    u = ensemble.projections(np.asarray(x_star, dtype=float))
    skipped = 0
    weights = np.empty(ensemble.m)
    for i, ui in enumerate(u):
        terms = expected_curvature(float(ui), q, sigma)
        weights[i] = -terms.value
        skipped += terms.skipped
    fim = ensemble.weighted_gram(weights)
    return CrbResult(fim=fim, crb_trace=math.nan, rank_deficient=False,
                     eigen_cutoff_used=math.nan, skipped_terms=skipped)


def crb_trace(fim: np.ndarray, cutoff: float = 1e-10) -> tuple[float, bool]:
    """Trace of the eigenvalue pseudo-inverse of a PSD matrix.

    Eigenvalues below ``cutoff`` times the largest are discarded; the flag
    reports whether any were, marking a (near) rank-deficient bound.
    """
    fim = np.asarray(fim, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (fim + fim.T))
    top = float(w[-1])
    if top <= 0.0:
        raise DegenerateInputError("uninformative measurements: Fisher matrix has no "
                                   "positive eigenvalue")
    keep = w > cutoff * top
    return float(np.sum(1.0 / w[keep])), bool(np.any(~keep))


def crb_result(
    ensemble: MeasurementEnsemble,
    x_star: np.ndarray,
    q: Quantizer,
    sigma: float,
    cutoff: float = 1e-10,
) -> CrbResult:
    """Fisher matrix plus its pseudo-inverse trace bound in one call."""
    partial = fisher_matrix(ensemble, x_star, q, sigma)
    trace, deficient = crb_trace(partial.fim, cutoff)
    return CrbResult(
        fim=partial.fim,
        crb_trace=trace,
        rank_deficient=deficient,
        eigen_cutoff_used=cutoff,
        skipped_terms=partial.skipped_terms,
    )


def score_vector(
    ensemble: MeasurementEnsemble,
    x_star: np.ndarray,
    q: Quantizer,
    sigma: float,
    bins: np.ndarray,
) -> np.ndarray:
    """Gradient of the log-likelihood at the true signal for observed cells:
    sum_i 2 u_i (phi'(tauL_i) - phi'(tauR_i)) / (phi(tauR_i) - phi(tauL_i)) a_i."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    u = ensemble.projections(np.asarray(x_star, dtype=float))
    bins = np.asarray(bins, dtype=np.int64)
    lo = np.concatenate([[-math.inf], q.thresholds])[bins - 1]
    hi = np.concatenate([q.thresholds, [math.inf]])[bins - 1]
    coeff = np.empty(ensemble.m)
    for i in range(ensemble.m):
        zl = (lo[i] - u[i] * u[i]) / sigma
        zr = (hi[i] - u[i] * u[i]) / sigma
        den = _normal_cdf_diff(zl, zr)
        if den <= _DEN_FLOOR:
            coeff[i] = 0.0
            continue
        num = _normal_pdf(zl) / sigma - _normal_pdf(zr) / sigma
        coeff[i] = 2.0 * u[i] * num / den
    return ensemble.rows.T @ coeff


def input_snr_db(ensemble: MeasurementEnsemble, x_star: np.ndarray, sigma: float) -> float:
    """Measurement-domain SNR of the noisy acquisition,
    10 log10( sum_i (a_i^T x*)^4 / (m sigma^2) )."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    u = ensemble.projections(np.asarray(x_star, dtype=float))
    return 10.0 * math.log10(float((u**4).sum()) / (ensemble.m * sigma * sigma))


def sigma_for_input_snr(
    ensemble: MeasurementEnsemble, x_star: np.ndarray, snr_db: float
) -> float:
    """Noise level that realizes a target input SNR on a fixed ensemble."""
    u = ensemble.projections(np.asarray(x_star, dtype=float))
    return math.sqrt(float((u**4).sum()) / (ensemble.m * 10.0 ** (snr_db / 10.0)))
