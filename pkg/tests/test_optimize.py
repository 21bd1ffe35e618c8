import numpy as np
import pytest

from noisyansatz.ansatz import TAU_COMPILE, TAU_PREPARE, NmrModel, init_parameters
from noisyansatz.channels import NoiseModel
from noisyansatz.diff import ControlProblem
from noisyansatz.linalg import RngStream, haar_pure_state
from noisyansatz.objectives import StatePreparation
from noisyansatz.optimize import (
    OptimizerConfig,
    minimize,
    strong_wolfe_ok,
    wolfe_line_search,
)


def quadratic(center):
    def fg(x):
        r = x - center
        return float(r @ r), 2 * r
    return fg


def rosenbrock(x):
    f = np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2)
    g = np.zeros_like(x)
    g[:-1] = -400 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2 * (1 - x[:-1])
    g[1:] += 200 * (x[1:] - x[:-1] ** 2)
    return float(f), g


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(c1=0.5, c2=0.1)
    with pytest.raises(ValueError):
        OptimizerConfig(max_iters=10, min_iters=20)
    cfg = OptimizerConfig()
    assert (cfg.c1, cfg.c2, cfg.eps_objective) == (1e-4, 0.9, 1e-16)


def test_quadratic_converges_within_sixteen_iterations():
    center = np.random.default_rng(0).normal(size=8)
    res = minimize(quadratic(center), np.zeros(8), OptimizerConfig(min_iters=0), check_wolfe=True)
    assert np.abs(res.x - center).max() < 1e-8
    assert res.report.iterations <= 16
    assert res.report.reason == "objective_floor"


def test_line_search_exact_on_one_dimensional_quadratic():
    fg = quadratic(np.array([3.0]))
    f0, g0 = fg(np.zeros(1))
    ls = wolfe_line_search(fg, np.zeros(1), f0, g0, -g0, 1.0)
    assert ls.success and ls.alpha == pytest.approx(0.5) and ls.evaluations == 2
    assert ls.f < f0


def test_line_search_rejects_ascent_direction():
    fg = quadratic(np.ones(2))
    f0, g0 = fg(np.zeros(2))
    with pytest.raises(ValueError):
        wolfe_line_search(fg, np.zeros(2), f0, g0, g0, 1.0)


def test_wolfe_assert_mode_on_rosenbrock():
    res = minimize(rosenbrock, np.array([-1.2, 1.0, -0.5, 0.8]), OptimizerConfig(max_iters=3000, min_iters=0),
                   check_wolfe=True)
    assert res.fun < 1e-6


def test_strong_wolfe_predicate():
    assert strong_wolfe_ok(1.0, -1.0, 0.5, -0.1, 1.0, 1e-4, 0.9) == (True, True)
    assert strong_wolfe_ok(1.0, -1.0, 1.0, -0.1, 1.0, 1e-4, 0.9) == (False, True)
    assert strong_wolfe_ok(1.0, -1.0, 0.5, -0.95, 1.0, 1e-4, 0.9) == (True, False)


def test_history_invariants_and_beta_cap():
    res = minimize(rosenbrock, np.array([-1.2, 1.0, 0.3]), OptimizerConfig(max_iters=60, min_iters=0))
    h = res.history
    assert h[0]["iteration"] == 0
    objs = [r["objective"] for r in h]
    assert res.fun == min(objs)
    assert all(b <= a for a, b in zip(objs, objs[1:]))  # accepted Wolfe steps always decrease
    for prev, cur in zip(h, h[1:]):
        cap = cur["gradient_norm"] ** 2 / prev["gradient_norm"] ** 2
        assert abs(cur["beta"]) <= cap * (1 + 1e-12)


def test_linesearch_failure_is_reported():
    def lying(x):
        f, g = quadratic(np.zeros(2))(x)
        return f, -g

    res = minimize(lying, np.ones(2), OptimizerConfig(max_linesearch=30, min_iters=0))
    assert res.report.reason == "linesearch_fail"
    assert res.report.iterations == 0


def test_max_iters_reason():
    res = minimize(rosenbrock, np.array([-1.2, 1.0]), OptimizerConfig(max_iters=3, min_iters=0))
    assert res.report.reason == "max_iters" and res.report.iterations == 3


def test_identical_seeds_give_identical_histories():
    def run():
        model = NmrModel.table_defaults(2, 8)
        g = RngStream(42, (1,)).generator()
        prob = ControlProblem(model, NoiseModel("dephasing", 1e-3), "constrained",
                              StatePreparation(haar_pure_state(4, g), haar_pure_state(4, g)))
        x0 = init_parameters(model, "constrained", RngStream(42, (2,))).raw.ravel()
        return minimize(prob, x0, OptimizerConfig(max_iters=20, min_iters=0))

    a, b = run(), run()
    assert a.history == b.history
    assert np.array_equal(a.x, b.x)


def test_single_qubit_state_preparation_converges():
    hits = 0
    for s in range(10):
        g = np.random.default_rng(s)
        model = NmrModel.table_defaults(1, 4, TAU_PREPARE)
        prob = ControlProblem(model, NoiseModel(), "unconstrained",
                              StatePreparation(haar_pure_state(2, g), haar_pure_state(2, g)))
        x0 = init_parameters(model, "unconstrained", RngStream(s, (2,))).raw.ravel()
        res = minimize(prob, x0, OptimizerConfig(max_iters=200, min_iters=0))
        hits += res.fun < 1e-10 and res.report.iterations <= 200
    assert hits >= 9


def test_resonant_step_makes_single_qubit_controls_inert():
    # h * tau = pi/2 at the compilation step: the symmetric layer collapses to a Z flip
    model = NmrModel.table_defaults(1, 3, TAU_COMPILE)
    assert model.h[0] * model.tau == pytest.approx(-np.pi / 2)
    g = np.random.default_rng(1)
    prob = ControlProblem(model, NoiseModel(), "unconstrained",
                          StatePreparation(haar_pure_state(2, g), haar_pure_state(2, g)))
    _, grad = prob.value_and_grad(g.uniform(-1, 1, 6) * model.theta_bar)
    assert np.abs(grad).max() < 1e-15
