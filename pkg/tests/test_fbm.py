import numpy as np
import pytest
from scipy import stats

from refsde.fbm import (
    CHOLESKY_CAP,
    HurstParameter,
    empirical_covariance,
    fbm_covariance,
    sample_cholesky,
    sample_circulant,
)
from refsde.grids import SamplePath, TimeGrid


class TestCovariance:
    def test_h_half_is_min(self):
        assert fbm_covariance(1.0, 2.0, 0.5) == pytest.approx(1.0)

    def test_zero_time(self):
        assert fbm_covariance(0.0, 3.7, 0.8) == 0.0

    def test_direct_value(self):
        assert fbm_covariance(1.0, 2.0, 0.75) == pytest.approx(np.sqrt(2.0), rel=1e-12)

    def test_symmetric(self):
        for s, t in [(0.3, 1.7), (2.0, 0.1), (1.0, 1.0)]:
            assert fbm_covariance(s, t, 0.7) == fbm_covariance(t, s, 0.7)

    def test_diagonal(self):
        assert fbm_covariance(1.3, 1.3, 0.8) == pytest.approx(1.3 ** 1.6)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            fbm_covariance(-0.1, 1.0, 0.75)


class TestHurstParameter:
    def test_valid(self):
        assert HurstParameter(0.75).value == 0.75

    @pytest.mark.parametrize("h", [0.5, 1.0, 0.2, 1.3])
    def test_out_of_range(self, h):
        with pytest.raises(ValueError):
            HurstParameter(h)


class TestCholesky:
    grid = TimeGrid(0.0, 1.0, 64)

    def test_deterministic(self):
        a = sample_cholesky(self.grid, 0.75, 3, seed=42)
        b = sample_cholesky(self.grid, 0.75, 3, seed=42)
        assert np.array_equal(a.values, b.values)

    def test_seed_sensitivity(self):
        a = sample_cholesky(self.grid, 0.75, 1, seed=1)
        b = sample_cholesky(self.grid, 0.75, 1, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_starts_at_zero(self):
        p = sample_cholesky(self.grid, 0.6, 5, seed=0)
        assert np.all(p.values[0] == 0.0)

    def test_cap(self):
        with pytest.raises(ValueError, match="capped"):
            sample_cholesky(TimeGrid(0.0, 1.0, CHOLESKY_CAP + 1), 0.75, 1, seed=0)

    def test_covariance_small_ensemble(self):
        # light version of the acceptance-scale check
        grid = TimeGrid(0.0, 1.0, 16)
        paths = sample_cholesky(grid, 0.7, 5000, seed=3)
        t = grid.times
        emp = paths.values @ paths.values.T / 5000
        ana = 0.5 * (t[:, None] ** 1.4 + t[None, :] ** 1.4
                     - np.abs(t[:, None] - t[None, :]) ** 1.4)
        var = np.diag(ana)
        se = np.sqrt((np.outer(var, var) + ana ** 2) / 5000)
        dev = np.abs(emp - ana)[1:, 1:] / se[1:, 1:]
        assert dev.max() < 5.0


class TestCirculant:
    def test_starts_at_zero(self):
        p = sample_circulant(TimeGrid(0.0, 1.0, 100), 0.8, 2, seed=0)
        assert np.all(p.values[0] == 0.0)

    def test_deterministic(self):
        g = TimeGrid(0.0, 2.0, 300)
        a = sample_circulant(g, 0.65, 2, seed=(5, 1))
        b = sample_circulant(g, 0.65, 2, seed=(5, 1))
        assert np.array_equal(a.values, b.values)

    def test_h_half_increment_independence(self):
        n = 100_000
        p = sample_circulant(TimeGrid(0.0, 1.0, n), 0.5, 1, seed=9)
        inc = np.diff(p.values[:, 0])
        inc = (inc - inc.mean()) / inc.std()
        lag1 = float(np.mean(inc[1:] * inc[:-1]))
        assert abs(lag1) < 3.0 / np.sqrt(n)

    def test_ks_against_cholesky(self):
        grid = TimeGrid(0.0, 1.0, 64)
        wc = sample_circulant(grid, 0.75, 3000, seed=11).values[-1]
        wk = sample_cholesky(grid, 0.75, 3000, seed=12).values[-1]
        assert stats.ks_2samp(wc, wk).pvalue > 0.05

    def test_increment_stationarity(self):
        # Var(W(t+delta)-W(t)) = delta^(2H) at any t
        grid = TimeGrid(0.0, 1.0, 32)
        p = sample_circulant(grid, 0.8, 8000, seed=13)
        lag = 4
        target = (lag * grid.dt) ** 1.6
        for k in (0, 10, 25):
            v = np.var(p.values[k + lag] - p.values[k])
            assert v == pytest.approx(target, rel=0.15)

    def test_self_similarity(self):
        # W(ct)/c^H has the law of W(t)
        h = 0.7
        a = sample_circulant(TimeGrid(0.0, 1.0, 64), h, 2000, seed=21).values[-1]
        b = sample_circulant(TimeGrid(0.0, 4.0, 64), h, 2000, seed=22).values[-1] / 4.0 ** h
        assert stats.ks_2samp(a, b).pvalue > 0.05

    def test_grid_must_start_at_zero(self):
        with pytest.raises(ValueError):
            sample_circulant(TimeGrid(-1.0, 1.0, 16), 0.75, 1, seed=0)


class TestEmpiricalCovariance:
    def test_single_zero_path(self):
        grid = TimeGrid(0.0, 1.0, 8)
        zero = SamplePath(grid, np.zeros(9))
        cov, dev = empirical_covariance([zero], [2, 5], 0.75)
        assert np.all(cov == 0.0)

    def test_probe_at_zero(self):
        grid = TimeGrid(0.0, 1.0, 8)
        paths = [sample_cholesky(grid, 0.75, 1, seed=i) for i in range(50)]
        cov, dev = empirical_covariance(paths, [0, 4], 0.75)
        assert cov[0, 0] == 0.0 and cov[0, 1] == 0.0

    def test_monte_carlo_agreement(self):
        grid = TimeGrid(0.0, 1.0, 16)
        draws = sample_cholesky(grid, 0.75, 4000, seed=5)
        paths = [SamplePath(grid, draws.values[:, i]) for i in range(4000)]
        cov, dev = empirical_covariance(paths, [4, 8, 12, 16], 0.75)
        assert dev < 0.1

    def test_grid_mismatch(self):
        a = SamplePath(TimeGrid(0.0, 1.0, 8), np.zeros(9))
        b = SamplePath(TimeGrid(0.0, 1.0, 16), np.zeros(17))
        with pytest.raises(ValueError):
            empirical_covariance([a, b], [1], 0.75)
