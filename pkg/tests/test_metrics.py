import math

import numpy as np
import pytest

from qprkit.errors import DomainError
from qprkit.measurement import acquire, gaussian_ensemble, gen_unit_sphere, intensities
from qprkit.metrics import (
    ReconReport,
    consistency_index,
    mse_from_snr_db,
    reconstruction_mse,
    reconstruction_snr,
)
from qprkit.quantizer import Quantizer, design_equiprobable, encode


class TestReconstructionSnr:
    def test_negated_estimate_is_exact(self):
        x = gen_unit_sphere(8, seed=1).x
        assert reconstruction_snr(-x, x) == math.inf

    def test_orthogonal_unit_pair(self):
        x = np.array([1.0, 0.0])
        y = np.array([0.0, 1.0])
        assert reconstruction_snr(y, x) == pytest.approx(10 * math.log10(0.5), abs=1e-12)

    def test_zero_estimate(self):
        x = gen_unit_sphere(5, seed=2).x
        assert reconstruction_snr(np.zeros(5), x) == pytest.approx(0.0, abs=1e-12)

    def test_sign_invariance(self, rng):
        for _ in range(20):
            x = rng.standard_normal(6)
            y = rng.standard_normal(6)
            assert reconstruction_snr(y, x) == reconstruction_snr(-y, x)

    def test_zero_reference_rejected(self):
        with pytest.raises(DomainError):
            reconstruction_snr(np.ones(3), np.zeros(3))

    def test_mse_reciprocal_relation(self, rng):
        x = gen_unit_sphere(6, seed=3).x
        y = rng.standard_normal(6)
        snr = reconstruction_snr(y, x)
        assert reconstruction_mse(y, x) * 10 ** (snr / 10.0) == pytest.approx(1.0, abs=1e-12)
        assert mse_from_snr_db(math.inf) == 0.0


class TestConsistencyIndex:
    def test_truth_scores_one(self):
        ens = gaussian_ensemble(50, 6, seed=4)
        x = gen_unit_sphere(6, seed=5).x
        q = design_equiprobable(8)
        assert consistency_index(ens, q, x, x) == 1.0

    def test_negated_truth_scores_one(self):
        ens = gaussian_ensemble(50, 6, seed=6)
        x = gen_unit_sphere(6, seed=7).x
        q = design_equiprobable(8)
        assert consistency_index(ens, q, -x, x) == 1.0

    def test_matches_indicator_loop(self, rng):
        ens = gaussian_ensemble(40, 5, seed=8)
        x = gen_unit_sphere(5, seed=9).x
        q = design_equiprobable(4)
        obs = acquire(ens, x, q)
        y = rng.standard_normal(5)
        got = consistency_index(ens, q, y, obs.bins)
        hits = sum(
            int(encode(q, float(b_hat)) == b_obs)
            for b_hat, b_obs in zip(intensities(ens, y), obs.bins)
        )
        assert got == pytest.approx(hits / 40.0, abs=0.0)

    def test_symbol_relabeling_invariant(self, rng):
        ens = gaussian_ensemble(30, 4, seed=10)
        x = gen_unit_sphere(4, seed=11).x
        q1 = design_equiprobable(4)
        # same cells, different interior codebook
        lo, hi = q1.lower_edges, q1.thresholds
        alt = np.concatenate([lo[:-1] + 0.7 * (hi - lo[:-1]), [q1.symbols[-1] + 1.0]])
        q2 = Quantizer(q1.thresholds, alt)
        y = rng.standard_normal(4)
        assert consistency_index(ens, q1, y, x) == consistency_index(ens, q2, y, x)


def test_report_bundle():
    ens = gaussian_ensemble(30, 4, seed=12)
    x = gen_unit_sphere(4, seed=13).x
    q = design_equiprobable(4)
    rep = ReconReport.evaluate(ens, q, x, x)
    assert rep.upsilon == 1.0 and rep.mse == 0.0 and math.isinf(rep.snr_db)
