from fractions import Fraction

import numpy as np
import pytest

from noisyansatz.ansatz import NmrModel
from noisyansatz.channels import LayeredChannel, NoiseModel, evolve
from noisyansatz.fperror import (
    FpErrorModel,
    accumulated_addition_error,
    chain_bound,
    chain_experiment,
    classical_bound,
    error_bounds,
    linearized_bounds,
    noisy_chain_multiply,
    noisy_evolution_infidelity,
    quantum_bound,
    relative_chain_error,
    sigma_matrix,
    sigma_norm,
)
from noisyansatz.linalg import RngStream, haar_pure_state, haar_unitary, schatten_norm


def chain(k, d=4, seed=0):
    g = np.random.default_rng(seed)
    return [haar_unitary(d, g) for _ in range(k)]


def test_model_invariants():
    assert not FpErrorModel().active
    with pytest.raises(ValueError):
        FpErrorModel(0.0, "deterministic_diagonal")
    with pytest.raises(ValueError):
        FpErrorModel(1e-8, "off")
    with pytest.raises(ValueError):
        FpErrorModel(-1e-8, "deterministic_diagonal")
    with pytest.raises(ValueError):
        FpErrorModel(1e-8, "stochastic_uniform")


def test_accumulated_addition_examples():
    assert accumulated_addition_error(5, 0.1, 5) == 0.0
    assert accumulated_addition_error(2, 0.5, 1) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        accumulated_addition_error(3, 0.1, 0)
    assert np.allclose(np.diag(sigma_matrix(3, 0.1)), [0.21, 0.1, 0.0])


def test_sigma_norm_scaling_with_dimension():
    eps = 1e-10
    for p in (1, 2, 4):
        ds = np.array([64, 128, 256, 512])
        norms = [schatten_norm(sigma_matrix(int(d), eps), p) for d in ds]
        slope = np.polyfit(np.log(ds), np.log(norms), 1)[0]
        assert slope == pytest.approx((p + 1) / p, abs=0.02)
    assert sigma_norm(8, eps) == pytest.approx(schatten_norm(sigma_matrix(8, eps), np.inf))


def test_bound_examples():
    assert classical_bound(50, 0.0) == 0.0
    assert quantum_bound(1, 0.5) == pytest.approx(1.0)
    assert quantum_bound(7, 1.0) == 2.0
    b = classical_bound(100, 1e-6)
    exact = float((1 + Fraction(1, 10**6)) ** 200 - 1)
    assert b == pytest.approx(exact, rel=1e-12)
    lin, _ = linearized_bounds(100, 1e-6, 0, 0.0)
    assert f"{b:.4g}" == f"{lin:.4g}"


def test_bounds_monotone():
    ks = [1, 2, 8, 64]
    assert np.all(np.diff([classical_bound(k, 1e-6) for k in ks]) > 0)
    assert np.all(np.diff([quantum_bound(k, 1e-3) for k in ks]) > 0)
    assert np.all(np.diff([classical_bound(8, e) for e in (1e-9, 1e-6, 1e-3)]) > 0)
    eb = error_bounds(10, 1e-6, 10, 1e-3)
    assert eb.bound_classical >= 0 and eb.bound_quantum >= 0


def test_classical_and_quantum_bounds_coincide_to_first_order():
    k = K = 1000
    assert classical_bound(k, 1e-8) == pytest.approx(quantum_bound(K, 1e-8), rel=1e-4)


def test_off_model_gives_exact_product():
    mats = chain(5)
    exact = mats[0] @ mats[1] @ mats[2] @ mats[3] @ mats[4]
    assert np.abs(noisy_chain_multiply(mats, FpErrorModel()) - exact).max() < 1e-14


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        noisy_chain_multiply([np.eye(2), np.eye(3)], FpErrorModel())


def test_single_factor_deterministic():
    A = haar_unitary(2, np.random.default_rng(1))
    eps = 1e-3
    out = noisy_chain_multiply([A], FpErrorModel(eps, "deterministic_diagonal"))
    assert np.allclose(out, A @ (np.eye(2) + sigma_matrix(2, eps)))
    assert relative_chain_error([A], FpErrorModel(eps, "deterministic_diagonal")) <= (1 + eps) - 1 + 1e-15


def test_interlaced_form():
    mats = chain(3, d=4, seed=2)
    eps = 1e-4
    S = np.eye(4) + sigma_matrix(4, eps)
    expected = mats[0] @ S @ mats[1] @ S @ mats[2] @ S
    assert np.allclose(noisy_chain_multiply(mats, FpErrorModel(eps, "deterministic_diagonal")), expected,
                       atol=1e-15)


def test_long_chain_within_order_of_bound():
    mats = chain(64, d=2, seed=3)
    err = relative_chain_error(mats, FpErrorModel(1e-8, "deterministic_diagonal"))
    bound = (1 + 1e-8) ** 64 - 1
    assert bound / 10 <= err <= bound


def test_deterministic_reproducible_and_stochastic_within_bound():
    mats = chain(32, seed=4)
    m = FpErrorModel(1e-6, "deterministic_diagonal")
    assert np.array_equal(noisy_chain_multiply(mats, m), noisy_chain_multiply(mats, m))
    root = RngStream(5)
    errs = [relative_chain_error(mats, FpErrorModel(1e-6, "stochastic_uniform", root.child(s))) for s in range(100)]
    assert np.mean(errs) <= chain_bound(32, 4, 1e-6)


def test_chain_experiment_table():
    rows = chain_experiment([4, 16], [1e-8], stochastic_samples=3)
    assert [r.k for r in rows] == [4, 16]
    for r in rows:
        assert r.measured_deterministic <= r.analytic_bound
        assert r.measured_stochastic_mean <= r.analytic_bound


def _circuit(M=12, seed=6):
    g = np.random.default_rng(seed)
    model = NmrModel(N=2, M=M, tau=0.3, J=g.normal(size=(2, 2)), h=g.normal(size=2), theta_bar=2.0)
    ch = LayeredChannel.from_raw(model, NoiseModel(), g.normal(size=4 * M), "unconstrained")
    return ch, haar_pure_state(4, g), haar_pure_state(4, g)


def test_injected_evolution_linear_in_epsilon():
    ch, sigma, target = _circuit()
    eps = np.array([1e-12, 1e-10, 1e-8])
    devs = [noisy_evolution_infidelity(ch, FpErrorModel(e, "deterministic_diagonal"), target, sigma).deviation
            for e in eps]
    assert np.polyfit(np.log(eps), np.log(devs), 1)[0] == pytest.approx(1.0, abs=0.1)


def test_injected_evolution_baseline_and_bound():
    ch, sigma, target = _circuit()
    res = noisy_evolution_infidelity(ch, FpErrorModel(1e-6, "deterministic_diagonal"), target, sigma)
    assert res.k == ch.model.M and res.deviation <= res.bound
    base = 1 - np.real(np.trace(target @ evolve(ch, sigma)))
    assert res.noiseless == pytest.approx(base, abs=1e-14)
    # shrinking epsilon approaches the native-precision result
    tiny = noisy_evolution_infidelity(ch, FpErrorModel(1e-17, "deterministic_diagonal"), target, sigma)
    assert tiny.deviation < 1e-14
    sto = noisy_evolution_infidelity(ch, FpErrorModel(1e-8, "stochastic_uniform", RngStream(1)), target, sigma)
    assert sto.deviation <= sto.bound


def test_injected_evolution_preconditions():
    ch, sigma, target = _circuit(M=2)
    with pytest.raises(ValueError):
        noisy_evolution_infidelity(ch, FpErrorModel(), target, sigma)
    noisy = ch.with_noise(NoiseModel("dephasing", 0.1))
    with pytest.raises(ValueError):
        noisy_evolution_infidelity(noisy, FpErrorModel(1e-8, "deterministic_diagonal"), target, sigma)
