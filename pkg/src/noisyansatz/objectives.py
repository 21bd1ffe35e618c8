"""Scalar figures of merit, Bloch-vector analytics and the optimization tasks."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .channels import LayeredChannel, evolve, evolve_unitary, noisy_scale
from .linalg import (
    _psd_eigen,
    check_hermitian,
    matrix_power_psd,
    pauli_basis,
    xlogx_sum,
)

PURE_TOL = 1e-10
BLOCH_TOL = 1e-9


def _dim(rho: np.ndarray) -> int:
    return rho.shape[-1]


def _check_pure(rho: np.ndarray) -> None:
    purity = float(np.real(np.trace(rho @ rho)))
    if abs(purity - 1.0) > PURE_TOL:
        raise ValueError(f"target must be a pure state (purity {purity:.12f})")


def infidelity_unitary(U_target: np.ndarray, U_theta: np.ndarray) -> float:
    if U_target.shape != U_theta.shape:
        raise ValueError("dimension mismatch")
    d = U_target.shape[0]
    ov = np.trace(U_target.conj().T @ U_theta)
    return float(1.0 - abs(ov) ** 2 / d**2)


def infidelity_state(rho_target: np.ndarray, rho: np.ndarray) -> float:
    if rho_target.shape != rho.shape:
        raise ValueError("dimension mismatch")
    _check_pure(rho_target)
    return float(1.0 - np.real(np.trace(rho_target @ rho)))


def proper_distance(infidelity: float) -> float:
    """Frobenius-type proper distance 1 - sqrt(1 - L)."""
    return float(1.0 - np.sqrt(max(0.0, 1.0 - infidelity)))


def impurity(rho: np.ndarray) -> float:
    return float(1.0 - np.real(np.trace(rho @ rho)))


def entropy(rho: np.ndarray) -> float:
    """von Neumann entropy normalized by log d."""
    d = _dim(rho)
    if d == 1:
        return 0.0
    w = _psd_eigen(rho).eigenvalues
    return float(-xlogx_sum(w) / np.log(d))


def conditional_entropy(rho: np.ndarray, rho_target: np.ndarray) -> tuple[float, bool]:
    """-tr(rho_target log rho) / log d; flag is False when the target leaves the support of rho."""
    d = _dim(rho)
    eig = _psd_eigen(rho)
    w = eig.eigenvalues
    V = eig.eigenvectors
    weights = np.real(np.einsum("ia,ij,ja->a", V.conj(), rho_target, V))
    null = w <= 1e-300
    if np.any(weights[null] > 1e-12):
        return float("inf"), False
    keep = ~null
    return float(-np.sum(weights[keep] * np.log(w[keep])) / np.log(d)), True


def divergence(rho: np.ndarray, rho_target: np.ndarray) -> tuple[float, bool]:
    """Relative entropy of the target with respect to rho, normalized by log d."""
    ce, ok = conditional_entropy(rho, rho_target)
    if not ok:
        return float("inf"), False
    return ce - entropy(rho_target), True


def cosine_dissimilarity(lam: np.ndarray, lam_ref: np.ndarray) -> float:
    n1 = float(lam @ lam)
    n2 = float(lam_ref @ lam_ref)
    if n1 == 0 or n2 == 0:
        return 1.0
    return float(1.0 - abs(lam @ lam_ref) / np.sqrt(n1 * n2))


@dataclass
class MetricValues:
    infidelity_state: float = float("nan")
    infidelity_unitary: float = float("nan")
    impurity: float = float("nan")
    entropy: float = float("nan")
    conditional_entropy: float = float("nan")
    divergence: float = float("nan")
    cosine_dissimilarity: float = float("nan")
    divergence_finite: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def state_metrics(rho: np.ndarray, rho_target: np.ndarray) -> MetricValues:
    ce, ok = conditional_entropy(rho, rho_target)
    div = ce - entropy(rho_target) if ok else float("inf")
    return MetricValues(
        infidelity_state=infidelity_state(rho_target, rho),
        impurity=impurity(rho),
        entropy=entropy(rho),
        conditional_entropy=ce,
        divergence=div,
        cosine_dissimilarity=cosine_dissimilarity(to_bloch(rho), to_bloch(rho_target)),
        divergence_finite=ok,
    )


@dataclass
class RenyiValues:
    alpha: float
    infidelity: float
    impurity: float
    entropy: float
    divergence: float


def _power_trace(A: np.ndarray, alpha: float) -> float:
    """tr(A^alpha) for PSD A, ignoring eigenvalues at roundoff level."""
    w = np.linalg.eigvalsh((A + A.conj().T) / 2)
    w = w[w > 1e-14 * max(w.max(), 0.0)]
    return float(np.sum(w**alpha))


def renyi_family(rho: np.ndarray, rho_target: np.ndarray, alpha: float) -> RenyiValues:
    """alpha-Renyi infidelity, impurity, entropy and divergence (alpha >= 1/2).

    The infidelity sandwiches rho between powers of the target; the divergence sandwiches
    the target between powers of rho, so that alpha -> 1 recovers `divergence`.
    """
    if alpha < 0.5:
        raise ValueError("alpha must be >= 1/2")
    d = _dim(rho)
    logd = np.log(d)
    if abs(alpha - 1.0) < 1e-12:
        return RenyiValues(1.0, float(1.0 - np.real(np.trace(rho_target @ rho))), impurity(rho), entropy(rho),
                           divergence(rho, rho_target)[0])
    s = (1 - alpha) / (2 * alpha)
    A = matrix_power_psd(rho_target, s)
    q_inf = _power_trace(A @ rho @ A, alpha)
    tr_pow = _power_trace(rho, alpha)
    imp = 1.0 - tr_pow
    ent = float(np.log(tr_pow) / ((1 - alpha) * logd))
    B = matrix_power_psd(rho, s)
    q_div = _power_trace(B @ rho_target @ B, alpha)
    div = float(np.log(q_div) / ((alpha - 1) * logd)) if q_div > 0 else float("inf")
    return RenyiValues(alpha, float(1.0 - q_inf), imp, ent, div)


# Bloch representation -----------------------------------------------------


@lru_cache(maxsize=8)
def _basis(n_qubits: int):
    return pauli_basis(n_qubits)


def _n_qubits(d: int) -> int:
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError("Bloch basis requires a qubit register (d = 2^N)")
    return n


def to_bloch(rho: np.ndarray) -> np.ndarray:
    """Coefficients lambda_a = tr(rho w_a) in the non-identity Pauli-string basis."""
    _, ops = _basis(_n_qubits(_dim(rho)))
    return np.real(np.einsum("aij,...ji->...a", ops, rho))


def from_bloch(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    d = int(round(np.sqrt(lam.shape[-1] + 1)))
    if float(lam @ lam) > d - 1 + BLOCH_TOL:
        raise ValueError(f"Bloch vector outside the ball: |lambda|^2 = {lam @ lam:.6f} > {d - 1}")
    _, ops = _basis(_n_qubits(d))
    return (np.eye(d) + np.tensordot(lam, ops, axes=1)) / d


@dataclass
class BlochAffineMap:
    Gamma: np.ndarray
    v: np.ndarray

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        return self.Gamma @ lam + self.v


def channel_to_affine(channel: LayeredChannel, scale: float = 1.0) -> BlochAffineMap:
    d = channel.d
    if d * d - 1 > 255:
        raise ValueError("affine extraction limited to d^2 - 1 <= 255")
    _, ops = _basis(_n_qubits(d))
    inputs = np.concatenate([np.eye(d)[None] / d, (np.eye(d)[None] + scale * ops) / d])
    outs = to_bloch(evolve(channel, inputs))
    v = outs[0]
    Gamma = ((outs[1:] - v) / scale).T
    return BlochAffineMap(Gamma, v)


@dataclass
class StateDecomposition:
    gamma_K: float
    alpha: float
    beta: float
    epsilon_mixed: np.ndarray | None
    zeta_orth: np.ndarray
    lam_target: np.ndarray
    lam_pure: np.ndarray
    lam_noisy: np.ndarray

    def recompose(self) -> np.ndarray:
        if self.epsilon_mixed is None:
            return self.lam_pure
        return (1 - self.gamma_K) * self.lam_pure + self.gamma_K * self.epsilon_mixed


def decompose_state(rho_noisy: np.ndarray | None, rho_target: np.ndarray, channel: LayeredChannel,
                    sigma: np.ndarray) -> StateDecomposition:
    """Split the noisy output into the noiseless evolved component and a mixed error component."""
    _check_pure(rho_target)
    if rho_noisy is None:
        rho_noisy = evolve(channel, sigma)
    U = evolve_unitary(channel)
    lam = to_bloch(rho_target)
    lam_pure = to_bloch(U @ sigma @ U.conj().T)
    lam_noisy = to_bloch(rho_noisy)
    norm2 = float(lam @ lam)
    one_minus_alpha = float(lam_pure @ lam) / norm2
    resid = lam_pure - one_minus_alpha * lam
    beta = float(np.sqrt(resid @ resid / norm2))
    zeta = resid / beta if beta > 1e-14 else np.zeros_like(lam)
    g = channel.noise.gamma if channel.noise.active else 0.0
    gK = noisy_scale(channel.K, g)
    eps = None if gK == 0 else (lam_noisy - (1 - gK) * lam_pure) / gK
    return StateDecomposition(gK, 1.0 - one_minus_alpha, beta, eps, zeta, lam, lam_pure, lam_noisy)


@dataclass
class LeadingOrder:
    infidelity: float
    impurity: float
    entropy_order: float
    divergence_order: float


def leading_order_predictions(decomp: StateDecomposition, K: int, gamma: float, d: int) -> LeadingOrder:
    """First-order (in K gamma) predictions for infidelity and impurity at a given alignment."""
    if K * gamma > 0.3:
        warnings.warn(f"K*gamma = {K * gamma:.3f} is outside the small-noise regime", stacklevel=2)
    c = (d - 1) / d
    lam = decomp.lam_target
    n2 = float(lam @ lam)
    a, b = decomp.alpha, decomp.beta
    Kg = K * gamma
    if decomp.epsilon_mixed is None or Kg == 0:
        return LeadingOrder(c * a, 0.0, 0.0, 0.0)
    eps = decomp.epsilon_mixed
    le = float(lam @ eps) / n2
    ze = float(decomp.zeta_orth @ eps) / n2
    infid = c * a + Kg * c * ((1 - a) - le)
    imp = 2 * Kg * c * (1 - (1 - a) * le - b * ze)
    marker = Kg * (d - 1) / np.log(d)
    return LeadingOrder(float(infid), float(imp), float(marker), float(marker))


# Optimization tasks ----------------------------------------------------------


class StatePreparation:
    """Prepare a pure target from a fixed initial state: L = 1 - tr(target Lambda(sigma))."""

    kind = "state"

    def __init__(self, sigma: np.ndarray, target: np.ndarray):
        self.sigma = np.asarray(sigma, dtype=complex)
        self.target = np.asarray(target, dtype=complex)
        _check_pure(self.target)
        self.inputs = self.sigma[None]
        self.observables = self.target[None]
        self.scale = -1.0

    def value(self, channel: LayeredChannel) -> float:
        return infidelity_state(self.target, evolve(channel, self.sigma))


class UnitaryCompilation:
    """Compile a target unitary: L = 1 - (1/d^2) sum_ab tr(U E_ba U^dagger Lambda(E_ab)).

    For a unitary channel V this equals 1 - |tr(U^dagger V)|^2 / d^2."""

    kind = "unitary"

    def __init__(self, target: np.ndarray):
        self.target = np.asarray(target, dtype=complex)
        d = self.target.shape[0]
        E = np.zeros((d * d, d, d), dtype=complex)
        for a in range(d):
            for b in range(d):
                E[a * d + b, a, b] = 1.0
        ET = np.swapaxes(E, -1, -2)
        self.inputs = E
        self.observables = self.target @ ET @ self.target.conj().T
        self.scale = -1.0 / d**2

    def value(self, channel: LayeredChannel) -> float:
        if not channel.noise.active:
            return infidelity_unitary(self.target, evolve_unitary(channel))
        out = evolve(channel, self.inputs)
        return float(1.0 + self.scale * np.real(np.einsum("bij,bji->", self.observables, out)))


def linear_value(objective, channel: LayeredChannel) -> float:
    """Objective through its linear form 1 + scale * sum_b tr(O_b Lambda(x_b))."""
    out = evolve(channel, objective.inputs)
    return float(1.0 + objective.scale * np.real(np.einsum("bij,bji->", objective.observables, out)))


__all__ = [name for name in dir() if not name.startswith("_")]
