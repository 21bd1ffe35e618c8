import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyansatz.fit import fit_critical_depth, fit_single_gamma, synthetic_curve

GRID = np.array([4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128], dtype=float)


@pytest.mark.parametrize("rate,bp,exponent", [(0.2, 11.0, 1.0), (0.1, 17.0, 1.5), (0.05, 23.5, 2.0), (0.03, 40.0, 1.2)])
def test_synthetic_breakpoint_recovered(rate, bp, exponent):
    L = synthetic_curve(GRID, rate, bp, exponent, scale=0.3)
    fit = fit_single_gamma(GRID, L, 1e-3)
    assert not fit.flagged
    assert abs(fit.breakpoint - bp) <= 1.0
    assert fit.rate == pytest.approx(rate, rel=1e-6)
    assert fit.exponent == pytest.approx(exponent, rel=1e-6)


@given(st.floats(0.02, 0.3), st.floats(7.0, 50.0), st.floats(0.5, 2.5))
@settings(max_examples=30)
def test_synthetic_breakpoint_property(rate, bp, exponent):
    L = synthetic_curve(GRID, rate, bp, exponent)
    fit = fit_single_gamma(GRID, L, 1e-3)
    assert not fit.flagged
    assert abs(fit.breakpoint - bp) <= 1.0


def test_single_regime_is_flagged():
    decay = np.exp(-0.1 * GRID)
    fit = fit_single_gamma(GRID, decay, 1e-3)
    assert fit.flagged and fit.breakpoint is None
    growth = 1e-3 * GRID**1.5
    assert fit_single_gamma(GRID, growth, 1e-2).flagged
    flat = np.full(GRID.size, 0.1)
    assert fit_single_gamma(GRID, flat, 1e-2).flagged


def test_input_validation():
    with pytest.raises(ValueError):
        fit_single_gamma(GRID[:3], np.ones(3), 1e-3)
    with pytest.raises(ValueError):
        fit_single_gamma(GRID, np.zeros(GRID.size), 1e-3)


def test_across_gamma_line_recovered():
    gammas = [1e-2, 1e-3, 1e-4, 1e-5]
    stats = {}
    for g in gammas:
        bp = 2.0 + 3.0 * np.log(1 / g)
        stats[g] = (GRID, synthetic_curve(GRID, 0.08, bp, 1.0))
    res = fit_critical_depth(stats)
    assert all(not g.flagged for g in res.per_gamma)
    assert res.slope == pytest.approx(3.0, abs=0.1)
    assert res.intercept == pytest.approx(2.0, abs=1.0)
    assert res.r2 > 0.99
    assert np.isfinite(res.slope_err) and np.isfinite(res.intercept_err)
    assert set(res.breakpoints()) == set(gammas)


def test_too_few_breakpoints_leave_line_unfitted():
    stats = {1e-2: (GRID, np.exp(-0.1 * GRID)), 1e-3: (GRID, synthetic_curve(GRID, 0.1, 20.0, 1.0))}
    res = fit_critical_depth(stats)
    assert np.isnan(res.slope)


def test_refit_of_rendered_fit_is_consistent():
    g = np.random.default_rng(3)
    L = synthetic_curve(GRID, 0.1, 20.0, 1.3) * np.exp(g.normal(scale=0.03, size=GRID.size))
    std = 0.03 * L
    first = fit_single_gamma(GRID, L, 1e-3, std, np.full(GRID.size, 5))
    render = synthetic_curve(GRID, first.rate, first.breakpoint, first.exponent, scale=L[0] / np.exp(-first.rate * GRID[0]))
    second = fit_single_gamma(GRID, render, 1e-3, std, np.full(GRID.size, 5))
    assert abs(second.breakpoint - first.breakpoint) <= max(first.breakpoint_err, 1.0)
    assert second.rate == pytest.approx(first.rate, rel=0.1)
    assert np.isfinite(first.breakpoint_err) and first.breakpoint_err > 0
