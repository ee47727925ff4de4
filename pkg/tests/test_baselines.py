"""Per-pixel testing with FDR control, and the circular scan."""

import numpy as np
import pytest

from mcd.baselines import (
    PValueField,
    circular_scan,
    pixel_pvalues,
    storey_fdr,
)
from mcd.baselines import _zone_llrs
from mcd.errors import ConfigurationError
from mcd.grid import Grid, WindowSpec
from mcd.stats import ModelSpec, estimate_null
from oracles import (
    oracle_binom_sf,
    oracle_poisson_sf,
    oracle_storey,
    oracle_zone_llr,
)


def circle_mask(shape, center, radius):
    ii, jj = np.indices(shape)
    return (ii - center[0]) ** 2 + (jj - center[1]) ** 2 <= radius**2


class TestPixelPvalues:
    def test_binomial_tail_hand_value(self):
        y = np.full((3, 3), 20)
        n = Grid(np.full((3, 3), 100))
        p = pixel_pvalues(Grid(y), ModelSpec("binomial", trials=n), null_param=0.2)
        assert p.values[0, 0] == pytest.approx(0.5398, abs=2e-4)
        assert p.values[0, 0] == pytest.approx(oracle_binom_sf(20, 100, 0.2), rel=1e-12)

    def test_normal_at_null_mean_is_half(self):
        y = np.zeros((4, 4))
        y[0, 0] = 3.0
        p = pixel_pvalues(Grid(y), ModelSpec("normal", sigma=1.0), null_param=0.0)
        assert p.values[1, 1] == pytest.approx(0.5)
        assert p.values[0, 0] < 0.01

    def test_poisson_zero_count_full_tail(self):
        y = np.zeros((3, 3), dtype=int)
        y[1, 1] = 4
        p = pixel_pvalues(Grid(y), ModelSpec("poisson"), null_param=2.0)
        assert p.values[0, 0] == 1.0
        assert p.values[1, 1] == pytest.approx(oracle_poisson_sf(4, 2.0), rel=1e-12)

    def test_matches_oracles_on_random_grids(self):
        rng = np.random.default_rng(211)
        n = rng.integers(5, 60, size=(6, 6))
        y = rng.binomial(n, 0.3)
        p = pixel_pvalues(Grid(y), ModelSpec("binomial", trials=Grid(n)), null_param=0.3)
        expected = [[oracle_binom_sf(int(y[i, j]), int(n[i, j]), 0.3) for j in range(6)] for i in range(6)]
        np.testing.assert_allclose(p.values, expected, rtol=1e-10)

        lam = 3.7
        yp = rng.poisson(lam, size=(6, 6))
        pp = pixel_pvalues(Grid(yp), ModelSpec("poisson"), null_param=lam)
        expected = [[oracle_poisson_sf(int(yp[i, j]), lam) for j in range(6)] for i in range(6)]
        np.testing.assert_allclose(pp.values, expected, rtol=1e-10)

    def test_default_null_matches_estimate_null(self):
        rng = np.random.default_rng(223)
        y = rng.binomial(40, 0.25, size=(7, 7))
        model = ModelSpec("binomial", trials=Grid(np.full((7, 7), 40)))
        auto = pixel_pvalues(Grid(y), model)
        manual = pixel_pvalues(Grid(y), model, null_param=estimate_null(Grid(y), model))
        np.testing.assert_array_equal(auto.values, manual.values)

    def test_normal_approximation_tracks_exact(self):
        rng = np.random.default_rng(227)
        y = rng.binomial(400, 0.2, size=(8, 8))
        model = ModelSpec("binomial", trials=Grid(np.full((8, 8), 400)))
        exact = pixel_pvalues(Grid(y), model, null_param=0.2)
        approx = pixel_pvalues(Grid(y), model, null_param=0.2, approx=True)
        np.testing.assert_allclose(approx.values, exact.values, atol=0.01)

    def test_invalid_null_rejected(self):
        y = Grid(np.ones((3, 3), dtype=int))
        with pytest.raises(ConfigurationError):
            pixel_pvalues(y, ModelSpec("binomial", trials=Grid(np.full((3, 3), 10))), null_param=1.5)
        with pytest.raises(ConfigurationError):
            pixel_pvalues(y, ModelSpec("poisson"), null_param=0.0)
        with pytest.raises(ConfigurationError):
            pixel_pvalues(y, ModelSpec("normal"), null_param=np.inf)


class TestStoreyFdr:
    def test_all_ones_rejects_nothing(self):
        p = PValueField(values=np.ones((5, 5)))
        res = storey_fdr(p, alpha=0.6)
        assert res.pi0_hat == 1.0
        assert res.rejected_count == 0
        assert res.gamma == 0.0

    def test_spiked_small_pvalues_all_kept(self):
        rng = np.random.default_rng(229)
        p = rng.uniform(size=10_000)
        p[:50] = 0.001
        res = storey_fdr(PValueField(values=p.reshape(100, 100)), alpha=0.6)
        assert res.mask.ravel()[:50].all()

    def test_matches_oracle_on_random_fields(self):
        rng = np.random.default_rng(233)
        for _ in range(5):
            p = rng.beta(0.4, 1.0, size=(12, 12))
            res = storey_fdr(PValueField(values=p), alpha=0.3)
            pi0, gamma, mask = oracle_storey(p, alpha=0.3)
            assert res.pi0_hat == pytest.approx(pi0, rel=1e-12)
            assert res.gamma == pytest.approx(gamma, rel=1e-12)
            np.testing.assert_array_equal(res.mask, mask)

    def test_mask_monotone_in_alpha(self):
        rng = np.random.default_rng(239)
        p = PValueField(values=rng.uniform(size=(20, 20)) ** 2)
        prev = np.zeros((20, 20), dtype=bool)
        for alpha in (0.05, 0.1, 0.2, 0.4, 0.6, 0.8):
            mask = storey_fdr(p, alpha=alpha).mask
            assert np.all(mask[prev])  # earlier rejections stay rejected
            prev = mask

    def test_pi0_lower_clip(self):
        p = PValueField(values=np.full((4, 4), 0.01))
        res = storey_fdr(p, alpha=0.5)
        assert res.pi0_hat == pytest.approx(1.0 / (0.5 * 16))
        assert res.rejected_count == 16

    def test_estimated_fdr_at_gamma_within_alpha(self):
        rng = np.random.default_rng(241)
        p = rng.uniform(size=(30, 30))
        p[:5, :5] = rng.uniform(0, 0.01, size=(5, 5))
        res = storey_fdr(PValueField(values=p), alpha=0.25)
        if res.gamma > 0:
            n_le = (p <= res.gamma).sum()
            assert res.pi0_hat * res.gamma * p.size / n_le <= 0.25 + 1e-12

    def test_parameters_validated(self):
        p = PValueField(values=np.ones((2, 2)))
        with pytest.raises(ConfigurationError):
            storey_fdr(p, alpha=0.0)
        with pytest.raises(ConfigurationError):
            storey_fdr(p, alpha=0.5, lam=1.0)


class TestZoneLlrs:
    def test_matches_oracle_all_families(self):
        rng = np.random.default_rng(251)
        shape = (9, 9)
        n = rng.integers(10, 40, size=shape)
        data = {
            "binomial": (rng.binomial(n, 0.3).astype(float), n.astype(float)),
            "poisson": (rng.poisson(4.0, size=shape).astype(float), np.ones(shape)),
            "normal": (rng.normal(1.0, 2.0, size=shape), np.ones(shape)),
        }
        for family, (y, exposure) in data.items():
            for center in ((4, 4), (0, 0), (8, 3)):
                for radius in (1, 2, 3):
                    zone = circle_mask(shape, center, radius)
                    y_in = y[zone].sum()
                    e_in = exposure[zone].sum()
                    got = _zone_llrs(family, np.array([[y_in]]), np.array([[e_in]]),
                                     y.sum(), exposure.sum(), 2.0)[0, 0]
                    want = oracle_zone_llr(y, exposure, family, zone, sigma=2.0)
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestCircularScan:
    def test_null_calibration(self):
        # data generated under the null: the most likely cluster should
        # rarely be called significant
        high = 0
        for run in range(20):
            rng = np.random.default_rng((307, run))
            y = rng.binomial(30, 0.25, size=(20, 20))
            res = circular_scan(Grid(y), ModelSpec("binomial", trials=Grid(np.full((20, 20), 30))),
                                radii=(1, 2, 3), mc_reps=99, seed=run)
            if res.clusters and res.clusters[0].p_value > 0.05:
                high += 1
        assert high >= 18  # >= 90% of runs

    def test_disc_recovered_with_high_jaccard(self):
        rng = np.random.default_rng(311)
        truth = circle_mask((100, 100), (50, 50), 19)
        probs = np.where(truth, 0.25, 0.20)
        y = rng.binomial(100, probs)
        res = circular_scan(Grid(y), ModelSpec("binomial", trials=Grid(np.full((100, 100), 100))),
                            radii=range(3, 21), mc_reps=99, seed=7)
        assert res.clusters and res.clusters[0].p_value <= 0.05
        inter = (res.mask & truth).sum()
        union = (res.mask | truth).sum()
        assert inter / union >= 0.8

    def test_uniform_grid_scores_zero(self):
        y = np.full((10, 10), 6)
        res = circular_scan(Grid(y), ModelSpec("poisson"), radii=(1, 2, 3), mc_reps=19, seed=1)
        assert res.max_llr == 0.0
        assert not res.mask.any()

    def test_two_separated_clusters_reported_disjoint(self):
        rng = np.random.default_rng(313)
        probs = np.full((40, 40), 0.2)
        probs[circle_mask((40, 40), (10, 10), 5)] = 0.55
        probs[circle_mask((40, 40), (30, 30), 5)] = 0.55
        y = rng.binomial(50, probs)
        res = circular_scan(Grid(y), ModelSpec("binomial", trials=Grid(np.full((40, 40), 50))),
                            radii=(3, 4, 5, 6, 7), mc_reps=19, seed=3)
        assert len(res.clusters) >= 2
        first, second = res.clusters[0], res.clusters[1]
        assert first.llr >= second.llr
        assert not (first.mask & second.mask).any()
        centers = {tuple(np.round(c.center, -1)) for c in res.clusters[:2]}
        assert centers == {(10, 10), (30, 30)}

    def test_determinism(self):
        rng = np.random.default_rng(317)
        y = rng.poisson(3.0, size=(15, 15))
        a = circular_scan(Grid(y), ModelSpec("poisson"), radii=(1, 2), mc_reps=19, seed=11)
        b = circular_scan(Grid(y), ModelSpec("poisson"), radii=(1, 2), mc_reps=19, seed=11)
        assert [(c.center, c.radius, c.llr, c.p_value) for c in a.clusters] == [
            (c.center, c.radius, c.llr, c.p_value) for c in b.clusters
        ]
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_pvalue_validity_under_null(self):
        # empirical size: P(p <= alpha) <= alpha + 1/(mc_reps+1)
        alpha = 0.05
        hits = 0
        runs = 200
        for run in range(runs):
            rng = np.random.default_rng((331, run))
            y = rng.poisson(5.0, size=(12, 12))
            res = circular_scan(Grid(y), ModelSpec("poisson"), radii=(1, 2), mc_reps=19, seed=run)
            if res.clusters and res.clusters[0].p_value <= alpha:
                hits += 1
        assert hits / runs <= alpha + 1.0 / 20 + 0.02  # small slack for MC noise

    def test_exposure_cap_blocks_oversized_zones(self):
        y = np.arange(49).reshape(7, 7)
        res = circular_scan(Grid(y), ModelSpec("poisson"), radii=(1, 20), mc_reps=19, seed=5)
        for c in res.clusters:
            assert c.cell_count <= 0.5 * 49

    def test_parameters_validated(self):
        y = Grid(np.ones((5, 5), dtype=int))
        with pytest.raises(ConfigurationError):
            circular_scan(y, ModelSpec("poisson"), mc_reps=10)
        with pytest.raises(ConfigurationError):
            circular_scan(y, ModelSpec("poisson"), radii=(), mc_reps=19)
        with pytest.raises(ConfigurationError):
            circular_scan(y, ModelSpec("poisson"), radii=(0, 1), mc_reps=19)

    def test_llr_depends_only_on_zone(self):
        # two center/radius pairs whose clipped zones coincide score identically
        y = np.zeros((4, 4), dtype=int)
        y[0, 0] = 9
        grid = Grid(y + 1)
        big = WindowSpec("circle", 9)  # clipped: covers the whole grid from any center
        from mcd.grid import build_sat, window_sum_field

        sat = build_sat(grid)
        s1, _ = window_sum_field(sat, big)
        assert s1.min() == s1.max()  # same zone -> same sum regardless of center
