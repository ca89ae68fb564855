import math

import numpy as np
import pytest

from qprkit import specfun
from qprkit.errors import DomainError
from qprkit.specfun import (
    GaussParams,
    adaptive_simpson,
    bessel_k0,
    chi2_1_cdf,
    chi2_1_inv_cdf,
    erf,
    erfc,
    gauss_cdf_family,
)

EULER_GAMMA = 0.5772156649015328606


def erf_taylor_oracle(x: float) -> float:
    """Alternating Maclaurin series summed to 1e-15, independent of the
    implementation's non-alternating/continued-fraction evaluation."""
    total = 0.0
    term = x
    n = 0
    while abs(term) > 1e-18:
        total += term / (2 * n + 1)
        n += 1
        term *= -x * x / n
    return 2.0 / math.sqrt(math.pi) * total


def k0_quadrature_oracle(x: float) -> float:
    """Adaptive Simpson on the integral representation int_0^inf e^{-x cosh t} dt,
    written independently of the implementation's fixed-step rule."""
    from scipy.integrate import quad

    val, err = quad(lambda t: math.exp(-x * math.cosh(t)), 0.0, math.acosh(745.0 / x) + 1.0,
                    limit=300, epsabs=1e-13, epsrel=1e-13)
    assert err < 1e-10
    return val


class TestErf:
    def test_zero(self):
        assert erf(0.0) == 0.0

    def test_saturates_to_one(self):
        assert abs(erf(6.0) - 1.0) <= 1e-12

    def test_value_at_one_vs_series_oracle(self):
        assert erf(1.0) == pytest.approx(erf_taylor_oracle(1.0), abs=1e-13)
        assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-12)

    @pytest.mark.parametrize("x", [0.1, 0.5, 1.7, 2.5, 2.99, 3.01, 4.0, 5.5])
    def test_matches_libm(self, x):
        assert erf(x) == pytest.approx(math.erf(x), abs=1e-12)

    def test_odd(self, rng):
        for x in rng.uniform(-6, 6, 200):
            assert erf(-x) == -erf(x)

    def test_erfc_tail_relative_accuracy(self):
        # continued-fraction branch: relative error matters for the CRB tails
        for x in [3.0, 5.0, 8.0, 12.0, 20.0]:
            assert erfc(x) == pytest.approx(math.erfc(x), rel=1e-11)


class TestChi2Cdf:
    def test_at_zero(self):
        assert chi2_1_cdf(0.0) == 0.0

    def test_deciles_from_literature(self):
        assert chi2_1_cdf(2.7056) == pytest.approx(0.9, abs=1e-3)
        assert chi2_1_cdf(3.4698) == pytest.approx(0.9375, abs=1e-3)

    def test_monotone(self):
        grid = np.linspace(0.0, 20.0, 400)
        vals = [chi2_1_cdf(b) for b in grid]
        assert np.all(np.diff(vals) > 0.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            chi2_1_cdf(-0.1)


def bisection_quantile_oracle(p: float) -> float:
    lo, hi = 0.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_1_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestChi2Quantile:
    def test_at_zero(self):
        assert chi2_1_inv_cdf(0.0) == 0.0

    def test_ninety_percent(self):
        assert chi2_1_inv_cdf(0.9) == pytest.approx(2.7056, abs=1e-3)

    def test_median_vs_bisection_oracle(self):
        assert chi2_1_inv_cdf(0.5) == pytest.approx(bisection_quantile_oracle(0.5), abs=1e-9)
        assert chi2_1_inv_cdf(0.5) == pytest.approx(0.45494, abs=1e-4)

    def test_roundtrip_grid(self):
        for p in np.linspace(0.0, 0.999, 61):
            assert chi2_1_cdf(chi2_1_inv_cdf(p)) == pytest.approx(p, abs=1e-9)

    @pytest.mark.parametrize("p", [-0.01, 1.0, 1.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            chi2_1_inv_cdf(p)


class TestBesselK0:
    @pytest.mark.parametrize("x", [0.01, 0.1, 1.0, 2.0, 5.0])
    def test_against_quadrature_oracle(self, x):
        assert bessel_k0(x) == pytest.approx(k0_quadrature_oracle(x), abs=1e-8)

    def test_frozen_values(self):
        assert bessel_k0(1.0) == pytest.approx(0.4210244382407083, abs=1e-10)
        assert bessel_k0(5.0) == pytest.approx(0.003691098334042595, abs=1e-10)

    def test_log_singularity(self):
        x = 1e-4
        assert bessel_k0(x) - (-math.log(0.5 * x) - EULER_GAMMA) == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            bessel_k0(x)


class TestGaussFamily:
    def test_center(self):
        cdf, pdf, dd = gauss_cdf_family(0.0, GaussParams(1.0))
        assert cdf == pytest.approx(0.5, abs=1e-14)
        assert pdf == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-14)
        assert dd == 0.0

    def test_tail_limits(self):
        for z, want in ((math.inf, 1.0), (-math.inf, 0.0)):
            cdf, pdf, dd = gauss_cdf_family(z, GaussParams(2.0))
            assert cdf == want and pdf == 0.0 and dd == 0.0

    def test_value_scaled(self):
        cdf, _, _ = gauss_cdf_family(1.0, GaussParams(2.0))
        assert cdf == pytest.approx(0.6914624612740131, abs=1e-5)

    def test_derivative_consistency(self):
        g = GaussParams(1.3)
        h = 1e-5
        for z in np.linspace(-4, 4, 33):
            cdf_p, pdf, dd = gauss_cdf_family(z, g)
            num_pdf = (gauss_cdf_family(z + h, g)[0] - gauss_cdf_family(z - h, g)[0]) / (2 * h)
            num_dd = (gauss_cdf_family(z + h, g)[1] - gauss_cdf_family(z - h, g)[1]) / (2 * h)
            assert pdf == pytest.approx(num_pdf, abs=1e-6)
            assert dd == pytest.approx(num_dd, abs=1e-5)

    def test_sigma_domain(self):
        with pytest.raises(DomainError):
            GaussParams(0.0)


def test_adaptive_simpson_on_polynomial():
    assert adaptive_simpson(lambda t: t**3 - t + 2.0, 0.0, 2.0, tol=1e-12) == pytest.approx(
        4.0 - 2.0 + 4.0, abs=1e-10
    )
