import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisyansatz.ansatz import NmrModel
from noisyansatz.channels import LayeredChannel, NoiseModel, evolve, evolve_unitary
from noisyansatz.linalg import PAULI_X, haar_pure_state, haar_unitary, random_density
from noisyansatz.objectives import (
    StatePreparation,
    UnitaryCompilation,
    channel_to_affine,
    conditional_entropy,
    cosine_dissimilarity,
    decompose_state,
    divergence,
    entropy,
    from_bloch,
    impurity,
    infidelity_state,
    infidelity_unitary,
    leading_order_predictions,
    linear_value,
    proper_distance,
    renyi_family,
    state_metrics,
    to_bloch,
)


def chan(N, M, kind="none", gamma=0.0, seed=0, raw=None, tau=0.4, zero_h=False):
    g = np.random.default_rng(seed)
    J = np.zeros((N, N)) if zero_h else g.normal(size=(N, N))
    h = np.zeros(N) if zero_h else g.normal(size=N)
    model = NmrModel(N=N, M=M, tau=tau, J=J, h=h, theta_bar=2.0)
    raw = g.normal(size=2 * N * M) if raw is None else raw
    noise = NoiseModel(kind, gamma) if gamma > 0 else NoiseModel()
    return LayeredChannel.from_raw(model, noise, raw, "unconstrained")


def test_unitary_infidelity_examples(rng):
    U = haar_unitary(4, rng)
    assert infidelity_unitary(U, U) == pytest.approx(0, abs=1e-14)
    assert infidelity_unitary(U, np.exp(0.7j) * U) == pytest.approx(0, abs=1e-14)
    assert infidelity_unitary(np.eye(2), PAULI_X) == pytest.approx(1)
    with pytest.raises(ValueError):
        infidelity_unitary(np.eye(2), np.eye(4))


def test_state_infidelity_examples(rng):
    psi = haar_pure_state(4, rng)
    assert infidelity_state(psi, psi) == pytest.approx(0, abs=1e-14)
    assert infidelity_state(psi, np.eye(4) / 4) == pytest.approx(0.75)
    up, down = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert infidelity_state(up, down) == 1.0
    with pytest.raises(ValueError):
        infidelity_state(np.eye(2) / 2, up)


def test_entropy_impurity_divergence_examples(rng):
    assert entropy(np.eye(4) / 4) == pytest.approx(1)
    assert impurity(haar_pure_state(4, rng)) == pytest.approx(0, abs=1e-14)
    assert impurity(np.eye(4) / 4) == pytest.approx(0.75)
    rho = random_density(4, rng)
    d, ok = divergence(rho, rho)
    assert ok and d == pytest.approx(0, abs=1e-12)


def test_divergence_support_mismatch_is_flagged():
    d, ok = divergence(np.diag([1.0, 0]), np.diag([0, 1.0]))
    assert not ok and d == np.inf
    m = state_metrics(np.diag([1.0, 0]).astype(complex), np.diag([0, 1.0]).astype(complex))
    assert not m.divergence_finite


@given(st.integers(0, 10_000))
def test_metric_ranges(seed):
    g = np.random.default_rng(seed)
    rho = random_density(4, g)
    m = state_metrics(rho, haar_pure_state(4, g))
    for v in (m.infidelity_state, m.impurity, m.entropy, m.cosine_dissimilarity):
        assert -1e-10 <= v <= 1 + 1e-10
    assert m.divergence >= -1e-10 and m.conditional_entropy >= -1e-10


def test_proper_distance():
    assert proper_distance(0.75) == pytest.approx(0.5)
    assert proper_distance(0.0) == 0.0


def test_renyi_examples(rng):
    r = renyi_family(np.eye(4) / 4, haar_pure_state(4, rng), 2.0)
    assert r.entropy == pytest.approx(1)
    with pytest.raises(ValueError):
        renyi_family(np.eye(2) / 2, np.diag([1.0, 0]), 0.4)


def test_renyi_half_divergence_uses_root_infidelity(rng):
    for _ in range(10):
        rho = random_density(4, rng)
        psi = haar_pure_state(4, rng)
        L = infidelity_state(psi, rho)
        half = renyi_family(rho, psi, 0.5).divergence
        assert half == pytest.approx(-2 * np.log(1 - proper_distance(L)) / np.log(4), rel=1e-10)


def test_renyi_alpha_one_is_von_neumann(rng):
    rho, psi = random_density(4, rng), haar_pure_state(4, rng)
    near = renyi_family(rho, psi, 1 + 1e-6)
    assert near.entropy == pytest.approx(entropy(rho), rel=1e-5)
    assert near.divergence == pytest.approx(divergence(rho, psi)[0], rel=1e-5)


def test_renyi_monotonicity_in_alpha(rng):
    alphas = [0.5, 1.0, 2.0, 4.0]
    for _ in range(10):
        rho, target = random_density(4, rng), random_density(4, rng)
        vals = [renyi_family(rho, target, a) for a in alphas]
        ent = [v.entropy for v in vals]
        div = [v.divergence for v in vals]
        assert all(a >= b - 1e-10 for a, b in zip(ent, ent[1:]))
        # sandwiched divergences grow with alpha
        assert all(a <= b + 1e-10 for a, b in zip(div, div[1:]))


def test_conditional_entropy_bound(rng):
    for d in (2, 4, 8):
        for _ in range(20):
            rho, psi = random_density(d, rng), haar_pure_state(d, rng)
            ce, _ = conditional_entropy(rho, psi)
            assert ce >= 2 / np.log(d) * proper_distance(infidelity_state(psi, rho)) - 1e-12


def test_bloch_examples():
    assert np.allclose(to_bloch(np.diag([1.0, 0])), [0, 0, 1])
    assert np.allclose(to_bloch(np.eye(4) / 4), 0)
    up, down = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert to_bloch(up) @ to_bloch(down) == pytest.approx(-1)
    with pytest.raises(ValueError):
        from_bloch(np.array([0, 0, 1.1]))


@given(st.integers(0, 10_000), st.sampled_from([2, 4, 8]))
def test_bloch_round_trip_and_overlap(seed, d):
    g = np.random.default_rng(seed)
    rho, sig = random_density(d, g), random_density(d, g)
    lam, lam2 = to_bloch(rho), to_bloch(sig)
    assert np.abs(from_bloch(lam) - rho).max() < 1e-12
    assert lam @ lam <= d - 1 + 1e-9
    assert np.trace(rho @ sig).real == pytest.approx((1 + lam @ lam2) / d, abs=1e-12)
    assert impurity(rho) == pytest.approx(1 - (1 + lam @ lam) / d, abs=1e-12)


def test_cosine_dissimilarity_matches_overlap_formula(rng):
    d = 4
    rho, psi = random_density(d, rng), haar_pure_state(d, rng)
    L, Ir, Ip = infidelity_state(psi, rho), impurity(rho), impurity(psi)
    cos = (d * (1 - L) - 1) / np.sqrt((d * (1 - Ir) - 1) * (d * (1 - Ip) - 1))
    assert cosine_dissimilarity(to_bloch(rho), to_bloch(psi)) == pytest.approx(1 - abs(cos), abs=1e-12)


def test_entropy_small_bloch_series(rng):
    lam0 = to_bloch(haar_pure_state(4, rng))
    ts = np.array([0.04, 0.02, 0.01])
    errs = []
    for t in ts:
        lam = t * lam0
        errs.append(abs(entropy(from_bloch(lam)) - (1 - lam @ lam / (2 * np.log(4)))))
    assert np.polyfit(np.log(ts), np.log(errs), 1)[0] > 2.8


def test_affine_identity_and_depolarizing():
    ident = channel_to_affine(chan(1, 1, raw=np.zeros(2), zero_h=True))
    assert np.allclose(ident.Gamma, np.eye(3)) and np.allclose(ident.v, 0)
    dep = channel_to_affine(chan(1, 1, "depolarizing", 0.2, raw=np.zeros(2), zero_h=True))
    assert np.allclose(dep.Gamma, 0.8 * np.eye(3)) and np.abs(dep.v).max() < 1e-12


def test_affine_amplitude_damping_translation():
    amp = channel_to_affine(chan(1, 1, "amplitude_damping", 0.3, raw=np.zeros(2), zero_h=True))
    assert np.linalg.norm(amp.v) == pytest.approx(0.3)


def test_affine_unitary_is_orthogonal_and_linear(rng):
    ch = chan(2, 3, seed=1)
    A = channel_to_affine(ch)
    assert np.abs(A.Gamma.T @ A.Gamma - np.eye(15)).max() < 1e-10
    B = channel_to_affine(ch, scale=0.5)
    assert np.abs(A.Gamma - B.Gamma).max() < 1e-12
    rho = random_density(4, rng)
    assert np.allclose(A(to_bloch(rho)), to_bloch(evolve(ch, rho)))
    noisy = channel_to_affine(chan(2, 3, "dephasing", 0.1, seed=1))
    assert np.linalg.norm(noisy.v) < 1e-10


def test_decomposition_round_trip(rng):
    ch = chan(2, 3, "dephasing", 0.05, seed=2)
    sigma, target = haar_pure_state(4, rng), haar_pure_state(4, rng)
    dec = decompose_state(None, target, ch, sigma)
    assert (1 - dec.alpha) ** 2 + dec.beta**2 == pytest.approx(1, abs=1e-9)
    assert abs(dec.zeta_orth @ dec.lam_target) < 1e-9
    assert np.abs(dec.recompose() - dec.lam_noisy).max() < 1e-10
    assert dec.gamma_K == pytest.approx(1 - 0.95**6)


def test_decomposition_at_noiseless_optimum(rng):
    ch = chan(2, 2, seed=3)
    sigma = haar_pure_state(4, rng)
    U = evolve_unitary(ch)
    dec = decompose_state(None, U @ sigma @ U.conj().T, ch, sigma)
    assert abs(dec.alpha) < 1e-12 and abs(dec.beta) < 1e-6
    assert dec.epsilon_mixed is None
    lo = leading_order_predictions(dec, ch.K, 0.0, 4)
    assert lo.infidelity == pytest.approx(0.75 * dec.alpha)


def test_leading_order_purifying_noise_has_no_first_order_term(rng):
    ch = chan(2, 2, "dephasing", 1e-3, seed=3)
    sigma = haar_pure_state(4, rng)
    U = evolve_unitary(ch)
    target = U @ sigma @ U.conj().T
    dec = decompose_state(None, target, ch, sigma)
    dec.epsilon_mixed = dec.lam_target.copy()
    assert leading_order_predictions(dec, ch.K, 1e-3, 4).infidelity == pytest.approx(0, abs=1e-12)


def test_leading_order_matches_simulation_at_aligned_parameters(rng):
    # the target is the noiseless output, so the coherent residual vanishes
    for gamma in (1e-3, 1e-4):
        ch = chan(2, 4, "dephasing", gamma, seed=8)
        sigma = haar_pure_state(4, rng)
        U = evolve_unitary(ch)
        target = U @ sigma @ U.conj().T
        rho = evolve(ch, sigma)
        dec = decompose_state(rho, target, ch, sigma)
        lo = leading_order_predictions(dec, ch.K, gamma, 4)
        assert lo.infidelity == pytest.approx(infidelity_state(target, rho), rel=0.1)
        assert lo.impurity == pytest.approx(impurity(rho), rel=0.1)


def test_leading_order_warns_outside_small_noise():
    ch = chan(1, 1, "dephasing", 0.4)
    dec = decompose_state(None, np.diag([1.0, 0]).astype(complex), ch, np.diag([1.0, 0]).astype(complex))
    with pytest.warns(UserWarning):
        leading_order_predictions(dec, 1, 0.4, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        leading_order_predictions(dec, 1, 0.1, 2)


@pytest.mark.parametrize("kind", ["none", "dephasing", "amplitude_damping"])
def test_objective_linear_forms(kind, rng):
    gamma = 0.0 if kind == "none" else 0.05
    ch = chan(2, 3, kind, gamma, seed=4)
    V = haar_unitary(4, rng)
    uc = UnitaryCompilation(V)
    assert linear_value(uc, ch) == pytest.approx(uc.value(ch), abs=1e-12)
    if kind == "none":
        assert uc.value(ch) == pytest.approx(infidelity_unitary(V, evolve_unitary(ch)), abs=1e-12)
    sp = StatePreparation(haar_pure_state(4, rng), haar_pure_state(4, rng))
    assert linear_value(sp, ch) == pytest.approx(sp.value(ch), abs=1e-12)
