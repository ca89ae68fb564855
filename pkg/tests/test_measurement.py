import numpy as np
import pytest
from scipy import integrate, stats

from qprkit.errors import ConfigError, DomainError
from qprkit.measurement import (
    MeasurementEnsemble,
    acquire,
    gaussian_ensemble,
    gen_sparse,
    gen_two_sinusoid,
    gen_unit_sphere,
    intensities,
    lifted_traces,
    write_ensemble_text,
    write_observation_csv,
)
from qprkit.quantizer import design_equiprobable
from qprkit.specfun import chi2_1_cdf


class TestIntensities:
    def test_zero_vector(self):
        ens = gaussian_ensemble(5, 3, seed=0)
        assert np.all(intensities(ens, np.zeros(3)) == 0.0)

    def test_coordinate_projection(self):
        ens = MeasurementEnsemble(np.array([[1.0, 0.0]]))
        assert intensities(ens, np.array([0.6, 0.8])) == pytest.approx([0.36])

    def test_distribution_ks(self):
        # unit signal: intensities follow the squared-normal law
        ens = gaussian_ensemble(100_000, 8, seed=11)
        x = gen_unit_sphere(8, seed=12).x
        b = np.sort(intensities(ens, x))
        ecdf = np.arange(1, b.size + 1) / b.size
        cdf = np.array([chi2_1_cdf(v) for v in b])
        ks = np.max(np.maximum(np.abs(ecdf - cdf), np.abs(ecdf - 1.0 / b.size - cdf)))
        assert ks < 0.01

    def test_dimension_mismatch(self):
        ens = gaussian_ensemble(5, 3, seed=0)
        with pytest.raises(DomainError):
            intensities(ens, np.zeros(4))


class TestLiftedTraces:
    def test_lifting_identity(self, rng):
        ens = gaussian_ensemble(50, 6, seed=3)
        x = gen_unit_sphere(6, seed=4).x
        np.testing.assert_allclose(
            lifted_traces(ens, np.outer(x, x)), intensities(ens, x), atol=1e-12
        )

    def test_identity_matrix_gives_row_norms(self):
        ens = gaussian_ensemble(7, 4, seed=5)
        np.testing.assert_allclose(
            lifted_traces(ens, np.eye(4)), (ens.rows**2).sum(axis=1), atol=1e-12
        )

    def test_matches_explicit_trace_loop(self, rng):
        ens = gaussian_ensemble(3, 4, seed=6)
        S = rng.standard_normal((4, 4))
        X = 0.5 * (S + S.T)
        want = [float(np.trace(np.outer(a, a) @ X)) for a in ens.rows]
        np.testing.assert_allclose(lifted_traces(ens, X), want, atol=1e-12)


class TestGenerators:
    def test_two_sinusoid_formula(self):
        n = 32
        gt = gen_two_sinusoid(n)
        ell = np.arange(1, n + 1)
        raw = 1.5 * np.sin(4 * np.pi * (ell - 1) / n) + 2.5 * np.cos(14 * np.pi * (ell - 1) / n)
        np.testing.assert_allclose(gt.x, raw / np.linalg.norm(raw), atol=1e-12)
        assert np.linalg.norm(gt.x) == pytest.approx(1.0, abs=1e-12)

    def test_two_sinusoid_first_entry(self):
        gt = gen_two_sinusoid(32)
        # first sample: sine term vanishes, cosine term is 2.5
        assert gt.x[0] > 0
        assert gt.x[0] == pytest.approx(2.5 / np.linalg.norm(
            1.5 * np.sin(4 * np.pi * np.arange(32) / 32)
            + 2.5 * np.cos(14 * np.pi * np.arange(32) / 32)
        ), abs=1e-12)

    def test_unit_sphere_norm(self):
        for seed in range(5):
            assert np.linalg.norm(gen_unit_sphere(16, seed).x) == pytest.approx(1.0, abs=1e-12)

    def test_sphere_coordinate_symmetry(self):
        draws = np.stack([gen_unit_sphere(8, seed=s).x for s in range(10_000)])
        mean = draws.mean(axis=0)
        # each coordinate has variance 1/n, so the mean is within 3 sigma of 0
        band = 3.0 / np.sqrt(8 * draws.shape[0])
        assert np.all(np.abs(mean) < band)

    def test_sparse_support(self):
        gt = gen_sparse(32, 6, seed=9)
        assert np.count_nonzero(gt.x) == 6
        assert np.linalg.norm(gt.x) == pytest.approx(1.0, abs=1e-12)

    def test_sparse_rejects_oversized_support(self):
        with pytest.raises(ConfigError):
            gen_sparse(4, 5, seed=0)


class TestAcquire:
    def test_noiseless_truth_is_consistent(self):
        ens = gaussian_ensemble(40, 8, seed=21)
        x = gen_unit_sphere(8, seed=22).x
        q = design_equiprobable(8)
        obs = acquire(ens, x, q, sigma_xi=0.0)
        from qprkit.quantizer import encode

        np.testing.assert_array_equal(obs.bins, encode(q, intensities(ens, x)))

    def test_same_seed_reproduces(self):
        ens = gaussian_ensemble(30, 6, seed=23)
        x = gen_unit_sphere(6, seed=24).x
        q = design_equiprobable(4)
        a = acquire(ens, x, q, sigma_xi=0.3, seed=77)
        b = acquire(ens, x, q, sigma_xi=0.3, seed=77)
        np.testing.assert_array_equal(a.bins, b.bins)

    def test_noise_flip_rate_matches_quadrature_oracle(self):
        # P(Q(b) = Q(b + xi)) for k=2, sigma^2 = 0.1, computed independently
        # by quadrature of the flip probability over the intensity density.
        q = design_equiprobable(2)
        tau = float(q.thresholds[0])
        sig = np.sqrt(0.1)
        inner = lambda b: stats.chi2.pdf(b, 1) * stats.norm.cdf((tau - b) / sig)
        outer = lambda b: stats.chi2.pdf(b, 1) * stats.norm.sf((tau - b) / sig)
        exact = (
            integrate.quad(inner, 0, tau, limit=300)[0]
            + integrate.quad(outer, tau, 80.0, limit=300)[0]
        )
        ens = gaussian_ensemble(20_000, 8, seed=25)
        x = gen_unit_sphere(8, seed=26).x
        clean = acquire(ens, x, q, sigma_xi=0.0)
        noisy = acquire(ens, x, q, sigma_xi=float(sig), seed=27)
        frac = float(np.mean(clean.bins == noisy.bins))
        assert frac == pytest.approx(exact, abs=0.015)

    def test_negative_sigma_rejected(self):
        ens = gaussian_ensemble(5, 3, seed=1)
        with pytest.raises(DomainError):
            acquire(ens, gen_unit_sphere(3, 2).x, design_equiprobable(2), sigma_xi=-1.0)


class TestDeterminismAndExport:
    def test_ensemble_regeneration(self):
        a = gaussian_ensemble(20, 5, seed=31)
        b = gaussian_ensemble(20, 5, seed=31)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_observation_csv(self, tmp_path):
        ens = gaussian_ensemble(6, 3, seed=32)
        x = gen_unit_sphere(3, seed=33).x
        obs = acquire(ens, x, design_equiprobable(4))
        path = tmp_path / "obs.csv"
        write_observation_csv(obs, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,bin,symbol"
        assert len(lines) == 7

    def test_ensemble_text_roundtrip(self, tmp_path):
        ens = gaussian_ensemble(4, 3, seed=34)
        path = tmp_path / "ens.txt"
        write_ensemble_text(ens, path)
        back = np.array([[float(v) for v in line.split()] for line in path.read_text().splitlines()])
        np.testing.assert_array_equal(back, ens.rows)

    def test_unit_norm_enforced(self):
        from qprkit.measurement import GroundTruth

        with pytest.raises(DomainError):
            GroundTruth(np.array([1.0, 1.0]))
