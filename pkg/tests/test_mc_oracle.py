import datetime as dt
import math

import numpy as np
import pytest
from scipy import stats

from rangevol import _kernels as K
from rangevol.abm_range import AbmParams
from rangevol.errors import BudgetError, InsufficientData, ParameterError
from rangevol.mc_oracle import (EXTREME_BETA, SimConfig, business_days, empirical_stats, extreme_shift,
                                ks_distance, n_grid_steps, simulate_extremes, simulate_ohlc)


class TestGenerator:
    def test_normals(self):
        z = np.empty(1_000_000)
        K.fill_normals(np.uint64(7), 0, 0, z, K.ZIG_X, K.ZIG_RATIO)
        assert abs(z.mean()) < 4 / 1000
        assert abs(z.var() - 1) < 4 * math.sqrt(2) / 1000
        assert stats.kstest(z, "norm").pvalue > 1e-3
        # the tail beyond the ziggurat base is drawn separately
        tail = np.mean(np.abs(z) > 3.442619855899)
        expected = 2 * stats.norm.sf(3.442619855899)
        assert abs(tail - expected) < 4 * math.sqrt(expected / 1e6)

    def test_streams_differ(self):
        a, b = np.empty(1000), np.empty(1000)
        K.fill_normals(np.uint64(7), 0, 0, a, K.ZIG_X, K.ZIG_RATIO)
        K.fill_normals(np.uint64(7), 1, 0, b, K.ZIG_X, K.ZIG_RATIO)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
        assert not np.array_equal(a, b)

    def test_beta_constant(self):
        from scipy.special import zeta
        assert EXTREME_BETA == pytest.approx(-zeta(0.5) / math.sqrt(2 * math.pi), rel=1e-15)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(n_paths=0), dict(steps_per_unit=0), dict(f=1.0), dict(f=-0.1),
                                        dict(seed=-1), dict(eps=0.0), dict(block=0),
                                        dict(antithetic=True, n_paths=3)])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            SimConfig(**kwargs)

    def test_budget(self):
        with pytest.raises(BudgetError):
            simulate_extremes(AbmParams(0, 1, 1), SimConfig(n_paths=100, max_work=1e5))

    def test_grid_steps(self):
        assert n_grid_steps(10_000, 1.0) == 10_000
        assert n_grid_steps(10_000, 0.7) == 7000
        assert n_grid_steps(10, 1e-6) == 1


class TestPaths:
    def test_deterministic(self):
        p = AbmParams(0.2, 0.7, 1.5)
        cfg = SimConfig(n_paths=500, seed=3, steps_per_unit=1000)
        a, b = simulate_extremes(p, cfg), simulate_extremes(p, cfg)
        for name in ("terminal", "maximum", "minimum"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_chunk_independent(self):
        p = AbmParams(-0.1, 1.0, 1.0)
        whole = simulate_extremes(p, SimConfig(n_paths=1000, seed=11, steps_per_unit=1000))
        head = simulate_extremes(p, SimConfig(n_paths=400, seed=11, steps_per_unit=1000))
        tail = simulate_extremes(p, SimConfig(n_paths=600, seed=11, steps_per_unit=1000), first_path=400)
        for name in ("terminal", "maximum", "minimum"):
            assert np.array_equal(getattr(whole, name), np.concatenate([getattr(head, name), getattr(tail, name)]))

    def test_seed_changes_paths(self):
        p = AbmParams(0, 1, 1)
        a = simulate_extremes(p, SimConfig(n_paths=10, seed=1, steps_per_unit=100))
        b = simulate_extremes(p, SimConfig(n_paths=10, seed=2, steps_per_unit=100))
        assert not np.array_equal(a.terminal, b.terminal)

    @pytest.mark.parametrize("block", [1, 7, 10, 32])
    def test_pruning_changes_nothing(self, block):
        n_paths, n_steps = 2000, 3000
        out = {}
        for prune in (True, False):
            x, hi, lo = np.empty(n_paths), np.empty(n_paths), np.empty(n_paths)
            K.path_extremes(np.uint64(5), 0, n_paths, 0.3, 1.2, 1.0, n_steps, block, 1e-12, prune, False,
                            x, hi, lo, K.ZIG_X, K.ZIG_RATIO)
            out[prune] = (x, hi, lo)
        for a, b in zip(out[True], out[False]):
            assert np.array_equal(a, b)

    def test_block_size_keeps_law(self):
        p = AbmParams(0.0, 1.0, 1.0)
        means = [simulate_extremes(p, SimConfig(n_paths=40_000, seed=s, steps_per_unit=400, block=b)).maximum
                 for s, b in ((1, 1), (2, 20))]
        diff = means[0].mean() - means[1].mean()
        se = math.sqrt(means[0].var() / means[0].size + means[1].var() / means[1].size)
        assert abs(diff) < 4 * se

    def test_extremes_bracket_path(self):
        paths = simulate_extremes(AbmParams(1.0, 0.5, 1.0), SimConfig(n_paths=2000, seed=1, steps_per_unit=500))
        assert np.all(paths.maximum >= np.maximum(paths.terminal, 0.0))
        assert np.all(paths.minimum <= np.minimum(paths.terminal, 0.0))
        assert np.array_equal(paths.range, paths.maximum - paths.minimum)
        assert len(paths) == 2000

    def test_terminal_law_with_strong_drift(self):
        paths = simulate_extremes(AbmParams(5.0, 1.0, 1.0), SimConfig(n_paths=100_000, seed=8, steps_per_unit=100))
        s = empirical_stats(paths.terminal)
        assert abs(s.mean - 5.0) < 3 * s.se
        assert np.var(paths.terminal, ddof=1) == pytest.approx(1.0, abs=4 * math.sqrt(2 / 1e5))

    def test_refinement(self):
        """Grid maxima rise toward the continuous mean as the grid is refined, by about beta sigma sqrt(dt)."""
        p = AbmParams(0.0, 1.0, 1.0)
        target = math.sqrt(2 / math.pi)
        means = []
        for steps in (100, 1000, 10_000):
            m = simulate_extremes(p, SimConfig(n_paths=100_000, seed=steps, steps_per_unit=steps)).maximum
            s = empirical_stats(m)
            means.append(s.mean)
            shifted = s.mean + extreme_shift(1.0, 1.0, steps)
            assert abs(shifted - target) < 4 * s.se + 0.3 / steps
        assert means[0] < means[1] < means[2] < target

    def test_extreme_correction(self):
        p = AbmParams(0.1, 0.4, 1.0)
        base = SimConfig(n_paths=100, seed=2, steps_per_unit=400)
        raw = simulate_extremes(p, base)
        corr = simulate_extremes(p, SimConfig(n_paths=100, seed=2, steps_per_unit=400, extreme_correction=True))
        shift = extreme_shift(0.4, 1.0, 400)
        assert np.allclose(corr.maximum - raw.maximum, shift, rtol=0, atol=1e-15)
        assert np.allclose(raw.minimum - corr.minimum, shift, rtol=0, atol=1e-15)
        assert np.array_equal(corr.terminal, raw.terminal)

    def test_antithetic(self):
        paths = simulate_extremes(AbmParams(0.0, 1.0, 1.0),
                                  SimConfig(n_paths=200, seed=4, steps_per_unit=300, antithetic=True))
        assert np.array_equal(paths.terminal[1::2], -paths.terminal[::2])
        assert np.array_equal(paths.maximum[1::2], -paths.minimum[::2])
        drifted = simulate_extremes(AbmParams(0.5, 1.0, 1.0),
                                    SimConfig(n_paths=200, seed=4, steps_per_unit=300, antithetic=True))
        assert np.allclose(drifted.terminal[::2] + drifted.terminal[1::2], 1.0, atol=1e-12)


class TestOhlc:
    def test_no_after_hours_means_no_gaps(self):
        bars = simulate_ohlc(0.001, 0.02, SimConfig(seed=1, steps_per_unit=200), 50)
        for prev, cur in zip(bars, bars[1:]):
            assert cur.open == prev.close

    def test_bars_valid_and_dated(self):
        bars = simulate_ohlc(0.0, 0.02, SimConfig(seed=1, f=0.3, steps_per_unit=200), 20,
                             s0=50.0, start=dt.date(2010, 6, 5))
        assert bars[0].open == pytest.approx(50.0, rel=1e-15)
        assert bars[0].date == dt.date(2010, 6, 7)
        assert all(b.date.weekday() < 5 for b in bars)
        assert all(b.low <= min(b.open, b.close) and b.high >= max(b.open, b.close) for b in bars)

    def test_deterministic(self):
        cfg = SimConfig(seed=12, f=0.25, steps_per_unit=300)
        assert simulate_ohlc(0.0, 0.01, cfg, 30) == simulate_ohlc(0.0, 0.01, cfg, 30)

    def test_after_hours_law(self):
        bars = simulate_ohlc(0.0, 0.1, SimConfig(seed=2, f=0.4, steps_per_unit=50), 20_000)
        o = np.log([b.open for b in bars[1:]])
        c = np.log([b.close for b in bars[:-1]])
        gap = o - c
        assert np.mean(gap) == pytest.approx(-0.005 * 0.4, abs=4 * math.sqrt(0.004 / 20_000))
        assert np.var(gap) == pytest.approx(0.004, rel=4 * math.sqrt(2 / 20_000))

    @pytest.mark.parametrize("kwargs", [dict(sigma=0.0), dict(n_days=0), dict(s0=-1.0), dict(mu_s=math.inf)])
    def test_invalid(self, kwargs):
        args = dict(mu_s=0.0, sigma=0.01, cfg=SimConfig(), n_days=5)
        args.update(kwargs)
        with pytest.raises(ParameterError):
            simulate_ohlc(**args)

    def test_business_days(self):
        days = business_days(dt.date(2010, 6, 18), 3)
        assert days == [dt.date(2010, 6, 18), dt.date(2010, 6, 21), dt.date(2010, 6, 22)]


class TestStatistics:
    def test_three_samples(self):
        s = empirical_stats([1.0, 2.0, 3.0])
        assert s.mean == 2.0
        assert s.se == pytest.approx(1 / math.sqrt(3), rel=1e-15)
        assert s.cdf(2.0) == pytest.approx(2 / 3)
        assert s.cdf(0.0) == 0.0
        assert s.cdf(3.0) == 1.0
        assert np.allclose(s.cdf([1.5, 10]), [1 / 3, 1])

    def test_single_and_empty(self):
        assert empirical_stats([4.0]).se == 0.0
        with pytest.raises(InsufficientData):
            empirical_stats([])

    def test_ks_distance(self):
        grid = np.linspace(0, 1, 11)
        assert ks_distance([0.5], grid, grid) == pytest.approx(0.5)
        u = (np.arange(1000) + 0.5) / 1000
        fine = np.linspace(0, 1, 2001)
        assert ks_distance(u, fine, fine) <= 0.001 + 1e-12
