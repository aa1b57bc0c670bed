"""Cost arithmetic and saturating power-law fitting."""

import numpy as np
import pytest

from motordiag.scaling import ScalingFit, compute_cost, fit_scaling_law, predict_loss

TRUE = dict(l_inf=0.2, x0=100.0, alpha=0.7)
GRID_X = (10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0)


def curve(x, l_inf=TRUE["l_inf"], x0=TRUE["x0"], alpha=TRUE["alpha"]):
    return l_inf + (x0 / x) ** alpha


def noiseless_points():
    return [(x, curve(x)) for x in GRID_X]


class TestComputeCost:
    def test_direct_volume(self):
        assert compute_cost(1e6, 1e9) == 6e15

    def test_batch_times_steps(self):
        assert compute_cost(1e6, batch_size=32, steps=1000) == 6.0 * 1e6 * 32000

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            compute_cost(0.0, 1e9)
        with pytest.raises(ValueError):
            compute_cost(1e6, -1.0)
        with pytest.raises(ValueError):
            compute_cost(1e6, batch_size=32, steps=0)
        with pytest.raises(ValueError):
            compute_cost(1e6)


class TestFit:
    def test_noiseless_round_trip(self):
        fit = fit_scaling_law(noiseless_points())
        assert fit.l_inf == pytest.approx(TRUE["l_inf"], rel=1e-3, abs=1e-4)
        assert fit.x0 == pytest.approx(TRUE["x0"], rel=1e-3)
        assert fit.alpha == pytest.approx(TRUE["alpha"], rel=1e-3)

    def test_noisy_round_trip_recovers_exponent(self):
        # 1% multiplicative noise; exponent within 10% on every seed.
        for seed in range(20):
            rng = np.random.default_rng(seed)
            points = [(x, curve(x) * (1.0 + 0.01 * rng.standard_normal())) for x in GRID_X]
            fit = fit_scaling_law(points)
            assert abs(fit.alpha - TRUE["alpha"]) / TRUE["alpha"] < 0.10

    def test_fit_never_worse_than_truth(self):
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            points = [(x, curve(x) * (1.0 + 0.01 * rng.standard_normal())) for x in GRID_X]
            fit = fit_scaling_law(points)
            x = np.array([p[0] for p in points])
            losses = np.array([p[1] for p in points])
            residual = losses - TRUE["l_inf"] - (TRUE["x0"] / x) ** TRUE["alpha"]
            assert fit.rss <= float(residual @ residual) + 1e-12

    def test_scale_covariance(self):
        base = fit_scaling_law(noiseless_points())
        scaled = fit_scaling_law([(10.0 * x, loss) for x, loss in noiseless_points()])
        assert scaled.x0 == pytest.approx(10.0 * base.x0, rel=1e-6)
        assert scaled.l_inf == pytest.approx(base.l_inf, abs=1e-6)
        assert scaled.alpha == pytest.approx(base.alpha, rel=1e-6)

    def test_arity_and_domain_errors(self):
        with pytest.raises(ValueError, match="4 points"):
            fit_scaling_law(noiseless_points()[:3])
        with pytest.raises(ValueError, match="positive"):
            fit_scaling_law([(-1.0, 0.5)] + noiseless_points()[:3])
        with pytest.raises(ValueError, match="positive"):
            fit_scaling_law([(5.0, 0.0)] + noiseless_points()[:3])
        with pytest.raises(ValueError, match="distinct"):
            fit_scaling_law([(10.0, 1.0), (10.0, 1.1), (30.0, 0.9), (90.0, 0.8)])


class TestPredict:
    def test_asymptote(self):
        fit = fit_scaling_law(noiseless_points())
        assert predict_loss(fit, 1e12 * fit.x0) == pytest.approx(fit.l_inf, abs=1e-6)

    def test_at_x0_is_floor_plus_one(self):
        fit = fit_scaling_law(noiseless_points())
        assert predict_loss(fit, fit.x0) == pytest.approx(fit.l_inf + 1.0)

    def test_rss_consistent_with_predictions(self):
        fit = fit_scaling_law(noiseless_points())
        rss = sum((loss - predict_loss(fit, x)) ** 2 for x, loss in fit.points)
        assert rss == pytest.approx(fit.rss, abs=1e-12)

    def test_strictly_decreasing_and_bounded_below(self):
        fit = fit_scaling_law(noiseless_points())
        xs = np.logspace(0, 6, 200)
        values = [predict_loss(fit, x) for x in xs]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(v > fit.l_inf for v in values)

    def test_nonpositive_x_rejected(self):
        fit = fit_scaling_law(noiseless_points())
        with pytest.raises(ValueError):
            predict_loss(fit, 0.0)

    def test_parameter_domain_enforced(self):
        with pytest.raises(ValueError):
            ScalingFit(l_inf=-0.1, x0=1.0, alpha=0.5, rss=0.0, points=())
        with pytest.raises(ValueError):
            ScalingFit(l_inf=0.1, x0=0.0, alpha=0.5, rss=0.0, points=())
