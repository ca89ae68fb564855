"""Sign-invariant reconstruction quality and measurement consistency.

A quadratic measurement cannot see the global sign of the signal, so both
metrics treat x and -x as the same reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .measurement import MeasurementEnsemble, intensities
from .quantizer import Quantizer, encode


def reconstruction_snr(x_hat: np.ndarray, x_star: np.ndarray) -> float:
    """10 log10 of |x*|^2 / min_{sign} |(+-x_hat) - x*|^2; +inf on an exact
    sign-resolved match."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if x_hat.shape != x_star.shape:
        raise DomainError(f"shape mismatch: {x_hat.shape} vs {x_star.shape}")
    ref = float(x_star @ x_star)
    if ref == 0.0:
        raise DomainError("reconstruction SNR is undefined for a zero reference signal")
    d_plus = x_hat - x_star
    d_minus = x_hat + x_star
    err = min(float(d_plus @ d_plus), float(d_minus @ d_minus))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(ref / err)


def mse_from_snr_db(snr_db: float) -> float:
    """Reciprocal of the linear SNR; 0 for an exact (+inf dB) match."""
    if math.isinf(snr_db):
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def reconstruction_mse(x_hat: np.ndarray, x_star: np.ndarray) -> float:
    """Sign-resolved relative squared error (reciprocal of the linear SNR)."""
    return mse_from_snr_db(reconstruction_snr(x_hat, x_star))


def consistency_index(
    ensemble: MeasurementEnsemble,
    q: Quantizer,
    x_hat: np.ndarray,
    reference,
) -> float:
    """Fraction of measurements whose noiseless re-encoding under ``x_hat``
    matches the reference cells.

    ``reference`` is either the observed cell indices or a signal vector,
    in which case its noiseless cells are used. Depends only on thresholds,
    never on the codebook symbols.
    """
    ref = np.asarray(reference)
    if ref.ndim == 1 and ref.dtype.kind == "f" and ref.size == ensemble.n:
        ref_bins = encode(q, intensities(ensemble, ref))
    else:
        ref_bins = ref.astype(np.int64)
        if ref_bins.shape != (ensemble.m,):
            raise DomainError(f"expected {ensemble.m} reference cells, got shape {ref.shape}")
    hat_bins = encode(q, intensities(ensemble, np.asarray(x_hat, dtype=float)))
    return float(np.mean(hat_bins == ref_bins))


@dataclass(frozen=True)
class ReconReport:
    """Bundle of the two figures of merit for one reconstruction."""

    snr_db: float
    mse: float
    upsilon: float

    @staticmethod
    def evaluate(ensemble, q, x_hat, x_star, reference=None) -> "ReconReport":
        snr = reconstruction_snr(x_hat, x_star)
        ref = x_star if reference is None else reference
        return ReconReport(snr, mse_from_snr_db(snr), consistency_index(ensemble, q, x_hat, ref))
