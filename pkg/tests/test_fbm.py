"""Samplers: exact laws, determinism, diagnostics."""

import math

import numpy as np
import pytest

from tqproc import analytic, fbm
from tqproc.errors import DataError, DomainError
from tqproc.fbm import GridSpec, FbmPath, make_ensemble
from tqproc.seeding import derive_seed, splitmix64


class TestSeeding:
    def test_splitmix_is_pure(self):
        assert splitmix64(42) == splitmix64(42)
        assert splitmix64(42) != splitmix64(43)

    def test_derive_seed_order_sensitive(self):
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert derive_seed(0, 0) != derive_seed(0, 1)

    def test_derived_seeds_distinct(self):
        seeds = {derive_seed(7, i) for i in range(10_000)}
        assert len(seeds) == 10_000


class TestGridSpec:
    def test_uniform_without_zero(self):
        g = GridSpec.uniform_grid(2.0, 16)
        assert g.M == 16 and g.times[0] == pytest.approx(0.125)
        assert g.times[-1] == 2.0 and g.uniform
        assert list(g.lattice_indices()) == list(range(1, 17))

    def test_uniform_with_zero(self):
        g = GridSpec.uniform_grid(2.0, 5, include_zero=True)
        assert g.times == (0.0, 0.5, 1.0, 1.5, 2.0)
        assert list(g.lattice_indices()) == [0, 1, 2, 3, 4]

    def test_from_times_detects_lattice(self):
        g = GridSpec.from_times([0.25, 0.5, 0.75, 1.0])
        assert g.uniform and g.step == pytest.approx(0.25)
        # a shifted window still on a finer lattice
        w = np.linspace(0.25, 2.0, 64)
        g2 = GridSpec.from_times(w)
        assert g2.uniform

    def test_from_times_sparse_lattice(self):
        # non-consecutive lattice points still count as uniform
        g = GridSpec.from_times([0.1, 0.2, 0.5])
        assert g.uniform and g.step == pytest.approx(0.1)
        assert list(g.lattice_indices()) == [1, 2, 5]

    def test_from_times_nonuniform(self):
        g = GridSpec.from_times([0.1, 0.25, 0.4])
        assert not g.uniform

    def test_validation(self):
        with pytest.raises(DomainError):
            GridSpec.from_times([1.0, 1.0, 2.0])
        with pytest.raises(DomainError):
            GridSpec(times=(0.5, 0.2), T=1.0, uniform=False)

    def test_index_of_requires_grid_time(self):
        g = GridSpec.uniform_grid(1.0, 4)
        assert g.index_of(0.5) == 1
        with pytest.raises(DomainError):
            g.index_of(0.3)


class TestCholesky:
    def test_hand_factor_two_points(self):
        # cov [[1,1],[1,2]] on {1,2} at H=1/2 factors as [[1,0],[1,1]]
        g = GridSpec.from_times([1.0, 2.0])
        L, warns = fbm._cholesky_factor(g, 0.5)
        assert np.allclose(L, [[1.0, 0.0], [1.0, 1.0]], atol=1e-14)
        assert warns == ()

    def test_marginal_variance_single_point(self):
        # var of B(t) over 1e5 paths within 3 SE of t^{2H}
        t, H = 1.7, 0.7
        g = GridSpec.from_times([t])
        e = make_ensemble(100_000, g, H, sampler_id="cholesky", master_seed=11)
        target = t ** (2 * H)
        se = target * math.sqrt(2.0 / e.n)
        assert abs(e.values.var() - target) <= 3 * se

    def test_seed_determinism(self):
        g = GridSpec.uniform_grid(1.0, 8)
        p1 = fbm.cholesky_sample(g, 0.4, seed=123)
        p2 = fbm.cholesky_sample(g, 0.4, seed=123)
        assert np.array_equal(p1.values, p2.values)
        p3 = fbm.cholesky_sample(g, 0.4, seed=124)
        assert not np.array_equal(p1.values, p3.values)

    def test_point_cap(self):
        g = GridSpec.uniform_grid(1.0, 4097)
        with pytest.raises(DomainError):
            fbm.cholesky_sample(g, 0.5, seed=0)


class TestCirculant:
    def test_requires_uniform(self):
        g = GridSpec.from_times([0.1, 0.25, 0.4])
        with pytest.raises(DomainError):
            fbm.circulant_sample(g, 0.5, seed=0)

    def test_seed_determinism(self):
        g = GridSpec.uniform_grid(2.0, 32)
        p1 = fbm.circulant_sample(g, 0.7, seed=5)
        p2 = fbm.circulant_sample(g, 0.7, seed=5)
        assert np.array_equal(p1.values, p2.values)

    def test_brownian_increments_uncorrelated(self):
        # H = 1/2: increments i.i.d. N(0, step); lag-1 correlation ~ 0
        g = GridSpec.uniform_grid(1.0, 4, include_zero=False)
        e = make_ensemble(100_000, g, 0.5, sampler_id="circulant", master_seed=3)
        inc = np.diff(np.hstack([np.zeros((e.n, 1)), e.values]), axis=1)
        step = 0.25
        assert inc.var(axis=0) == pytest.approx(step, rel=0.03)
        r = np.corrcoef(inc[:, 0], inc[:, 1])[0, 1]
        assert abs(r) <= 3.0 / math.sqrt(e.n)

    @pytest.mark.parametrize("H", [0.3, 0.75])
    def test_covariance_against_analytic(self, H):
        # 8-point grid, 2e4 paths, every entry within 4 SE of the closed form
        g = GridSpec.uniform_grid(2.0, 8)
        e = make_ensemble(20_000, g, H, sampler_id="circulant", master_seed=17)
        ts = g.array
        target = analytic.fbm_covariance(ts[:, None], ts[None, :], H)
        sample = e.values.T @ e.values / e.n
        var = np.diag(target)
        se = np.sqrt((np.outer(var, var) + target**2) / e.n)
        assert np.all(np.abs(sample - target) <= 4.0 * se)

    def test_single_increment_grid(self):
        g = GridSpec.from_times([0.5])
        e = make_ensemble(50_000, g, 0.6, sampler_id="circulant", master_seed=2)
        target = 0.5 ** 1.2
        se = target * math.sqrt(2.0 / e.n)
        assert abs(e.values.var() - target) <= 3 * se


class TestEnsemble:
    def test_single_path_reduces_to_sampler(self):
        g = GridSpec.uniform_grid(1.0, 8)
        e = make_ensemble(1, g, 0.5, sampler_id="circulant", master_seed=9)
        p = fbm.circulant_sample(g, 0.5, seed=derive_seed(9, 0))
        assert np.array_equal(e.values[0], p.values)

    def test_bytewise_determinism(self):
        g = GridSpec.uniform_grid(2.0, 16, include_zero=True)
        e1 = make_ensemble(64, g, 0.3, master_seed=1234)
        e2 = make_ensemble(64, g, 0.3, master_seed=1234)
        assert e1.values.tobytes() == e2.values.tobytes()

    def test_prefix_property(self):
        # the first paths of a larger ensemble equal the smaller ensemble
        g = GridSpec.uniform_grid(1.0, 8)
        small = make_ensemble(10, g, 0.5, master_seed=5)
        big = make_ensemble(20, g, 0.5, master_seed=5)
        assert np.array_equal(small.values, big.values[:10])

    def test_zero_anchoring(self):
        g = GridSpec.uniform_grid(1.0, 9, include_zero=True)
        for sampler in ("cholesky", "circulant"):
            e = make_ensemble(16, g, 0.5, sampler_id=sampler, master_seed=8)
            assert np.all(e.values[:, 0] == 0.0)

    def test_path_independence(self):
        # even/odd path pairs behave like independent draws at a fixed time
        g = GridSpec.from_times([1.0])
        e = make_ensemble(20_000, g, 0.5, master_seed=21)
        x, y = e.values[0::2, 0], e.values[1::2, 0]
        r = np.corrcoef(x, y)[0, 1]
        assert abs(r) <= 3.0 / math.sqrt(len(x))

    def test_cross_sampler_agreement(self):
        # small version of the fidelity criterion: same law, different streams
        g = GridSpec.uniform_grid(2.0, 8)
        ts = g.array
        target = analytic.fbm_covariance(ts[:, None], ts[None, :], 0.5)
        var = np.diag(target)
        se = np.sqrt((np.outer(var, var) + target**2) / 20_000)
        e1 = make_ensemble(20_000, g, 0.5, sampler_id="cholesky", master_seed=31)
        e2 = make_ensemble(20_000, g, 0.5, sampler_id="circulant", master_seed=32)
        c1 = e1.values.T @ e1.values / e1.n
        c2 = e2.values.T @ e2.values / e2.n
        assert np.all(np.abs(c1 - c2) <= 5.0 * np.sqrt(2.0) * se)

    def test_values_read_only(self):
        g = GridSpec.from_times([1.0])
        e = make_ensemble(4, g, 0.5, master_seed=0)
        with pytest.raises(ValueError):
            e.values[0, 0] = 1.0


class TestModulusStatistic:
    def test_constant_path(self):
        g = GridSpec.uniform_grid(1.0, 5, include_zero=True)
        p = FbmPath(H=0.5, grid=g, values=np.full(5, 2.2))
        assert fbm.modulus_statistic(p) == 0.0

    def test_single_pair_unit_gauge(self):
        g = GridSpec.from_times([0.0, 1.0])
        p = FbmPath(H=0.5, grid=g, values=np.array([0.0, 1.0]))
        assert fbm.modulus_statistic(p) == pytest.approx(1.0, abs=1e-15)

    def test_maxlag_restriction(self):
        g = GridSpec.uniform_grid(1.0, 64, include_zero=True)
        p = fbm.circulant_sample(g, 0.5, seed=77)
        full = fbm.modulus_statistic(p)
        capped = fbm.modulus_statistic(p, maxlag=4)
        assert capped <= full

    def test_distribution_stability_across_resolution(self):
        # median of the statistic stable within 25% between M=256 and M=1024
        meds = []
        for M in (256, 1024):
            g = GridSpec.uniform_grid(1.0, M, include_zero=True)
            e = make_ensemble(1000, g, 0.5, master_seed=99)
            ts = g.array
            best = np.zeros(e.n)
            for k in range(1, M):
                gauge = analytic.modulus_gauge(ts[k:] - ts[:-k], 0.5)
                dv = np.abs(e.values[:, k:] - e.values[:, :-k]) / gauge
                best = np.maximum(best, dv.max(axis=1))
            meds.append(np.median(best))
        assert abs(meds[1] - meds[0]) / meds[0] <= 0.25


class TestTailFit:
    def test_gaussian_tail_quality(self):
        g = GridSpec.uniform_grid(1.0, 64, include_zero=True)
        e = make_ensemble(20_000, g, 0.5, master_seed=41)
        tf = fbm.tail_fit(e, [1.0, 1.5, 2.0, 2.5])
        assert tf.c_hat > 0.0
        assert tf.r_squared >= 0.95
        assert all(p1 >= p2 for p1, p2 in zip(tf.tail_probs, tf.tail_probs[1:]))

    def test_unreachable_level_dropped(self):
        g = GridSpec.uniform_grid(1.0, 16, include_zero=True)
        e = make_ensemble(5000, g, 0.5, master_seed=43)
        tf = fbm.tail_fit(e, [1.0, 1.5, 2.0, 20.0])
        assert tf.dropped_levels == (20.0,)
        assert len(tf.levels) == 3

    def test_too_few_surviving_levels(self):
        g = GridSpec.uniform_grid(1.0, 16, include_zero=True)
        e = make_ensemble(2000, g, 0.5, master_seed=44)
        with pytest.raises(DataError):
            fbm.tail_fit(e, [18.0, 19.0, 20.0])

    def test_larger_horizon_heavier_tail(self):
        levels = [1.5, 2.0, 2.5]
        fits = []
        for T in (1.0, 2.0):
            g = GridSpec.uniform_grid(T, 64, include_zero=True)
            e = make_ensemble(30_000, g, 0.5, master_seed=45)
            fits.append(fbm.tail_fit(e, levels))
        assert fits[1].c_hat <= fits[0].c_hat
