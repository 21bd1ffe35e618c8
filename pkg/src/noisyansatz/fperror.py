"""Injected floating-point error in matrix-product chains and closed-form deviation bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import LayeredChannel
from .linalg import RngStream, _as_generator, dagger, haar_unitary

FP_MODES = ("deterministic_diagonal", "stochastic_uniform", "off")


@dataclass(frozen=True)
class FpErrorModel:
    epsilon: float = 0.0
    mode: str = "off"
    rng: RngStream | None = None

    def __post_init__(self):
        if self.mode not in FP_MODES:
            raise ValueError(f"unknown error mode {self.mode!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if (self.mode == "off") != (self.epsilon == 0):
            raise ValueError("mode 'off' goes with epsilon = 0 and only then")
        if self.mode == "stochastic_uniform" and self.rng is None:
            raise ValueError("stochastic mode needs an rng")

    @property
    def active(self) -> bool:
        return self.mode != "off"


@dataclass(frozen=True)
class ErrorBound:
    k: int
    bound_classical: float
    bound_quantum: float


def accumulated_addition_error(d: int, epsilon: float, mu: int) -> float:
    """Relative error picked up by the mu-th summand of a length-d running sum."""
    if not 1 <= mu <= d:
        raise ValueError("need 1 <= mu <= d")
    return float((1.0 + epsilon) ** (d - mu) - 1.0)


def sigma_matrix(d: int, epsilon: float) -> np.ndarray:
    return np.diag([accumulated_addition_error(d, epsilon, mu) for mu in range(1, d + 1)])


def sigma_norm(d: int, epsilon: float) -> float:
    """Spectral norm of the diagonal error matrix, i.e. its largest entry."""
    return accumulated_addition_error(d, epsilon, 1)


def classical_bound(k: int, epsilon: float) -> float:
    if k < 0 or epsilon < 0:
        raise ValueError("k and epsilon must be non-negative")
    return float(abs(np.expm1(2 * k * np.log1p(epsilon))))


def quantum_bound(K: int, gamma: float) -> float:
    if K < 0 or not 0 <= gamma <= 1:
        raise ValueError("need K >= 0 and 0 <= gamma <= 1")
    return float(2 * abs(-np.expm1(K * np.log1p(-gamma)))) if gamma < 1 else (2.0 if K else 0.0)


def linearized_bounds(k: int, epsilon: float, K: int, gamma: float) -> tuple[float, float]:
    """Small-scale limits 2 k epsilon and 2 K gamma."""
    return 2.0 * k * epsilon, 2.0 * K * gamma


def error_bounds(k: int, epsilon: float, K: int, gamma: float) -> ErrorBound:
    return ErrorBound(k, classical_bound(k, epsilon), quantum_bound(K, gamma))


def chain_bound(k: int, d: int, epsilon: float) -> float:
    """Relative spectral-norm bound for k products each carrying one (I + Sigma) factor."""
    return float(np.expm1(k * np.log1p(sigma_norm(d, epsilon))))


class _Injector:
    def __init__(self, model: FpErrorModel, d: int):
        self.model = model
        self.d = d
        if model.mode == "deterministic_diagonal":
            self.factor = 1.0 + np.diag(sigma_matrix(d, model.epsilon))
        self.gen = _as_generator(model.rng) if model.mode == "stochastic_uniform" else None
        self.count = 0

    def __call__(self, product: np.ndarray) -> np.ndarray:
        self.count += 1
        mode = self.model.mode
        if mode == "off":
            return product
        if mode == "deterministic_diagonal":
            return product * self.factor  # A @ diag(1 + Sigma)
        eps = self.model.epsilon
        u = self.gen.uniform(-eps / 2, eps / 2, size=product.shape)
        return product * (1.0 + u)


def noisy_chain_multiply(matrices, model: FpErrorModel) -> np.ndarray:
    """A_1 A_2 ... A_k, accumulated right to left with error injected after every product.

    Deterministic mode yields A_1 (I+S) A_2 (I+S) ... A_k (I+S) with S the diagonal
    addition-error matrix; stochastic mode perturbs every entry of each new product by a
    relative uniform draw on [-eps/2, eps/2].
    """
    mats = [np.asarray(A) for A in matrices]
    if not mats:
        raise ValueError("empty chain")
    for A, B in zip(mats[:-1], mats[1:]):
        if A.ndim != 2 or A.shape[1] != B.shape[0]:
            raise ValueError(f"non-conformable chain: {A.shape} then {B.shape}")
    inject = _Injector(model, mats[-1].shape[1])
    P = None
    for A in reversed(mats):
        if model.mode == "deterministic_diagonal":
            P = inject(A) if P is None else inject(A) @ P
        else:
            P = inject(A if P is None else A @ P)
    return P


def relative_chain_error(matrices, model: FpErrorModel) -> float:
    exact = noisy_chain_multiply(matrices, FpErrorModel())
    noisy = noisy_chain_multiply(matrices, model)
    return float(np.linalg.norm(noisy - exact, 2) / np.linalg.norm(exact, 2))


@dataclass
class FpDeviation:
    noiseless: float
    injected: float
    deviation: float
    bound: float
    k: int


def _evolve_injected(channel: LayeredChannel, sigma: np.ndarray, inject) -> np.ndarray:
    rho = np.asarray(sigma, dtype=complex)
    U = channel.unitaries
    Uh = dagger(U)
    for m in range(channel.model.M):
        rho = inject(U[m] @ rho)
        rho = inject(rho @ Uh[m])
    return rho


def noisy_evolution_infidelity(channel: LayeredChannel, model: FpErrorModel, target: np.ndarray,
                               sigma: np.ndarray) -> FpDeviation:
    """State infidelity with every matrix product of the evolution error-injected.

    k counts the layer-unitary applications (two products each); the bound uses the
    spectral norm of the per-product error factor.
    """
    if channel.noise.active:
        raise ValueError("classical error injection expects the noiseless ansatz")
    if not model.active:
        raise ValueError("error model is off")
    target = np.asarray(target, dtype=complex)
    exact = _evolve_injected(channel, sigma, lambda A: A)
    inject = _Injector(model, channel.d)
    noisy = _evolve_injected(channel, sigma, inject)
    L0 = 1.0 - float(np.real(np.trace(target @ exact)))
    Le = 1.0 - float(np.real(np.trace(target @ noisy)))
    k = channel.model.M
    if model.mode == "deterministic_diagonal":
        eff = sigma_norm(channel.d, model.epsilon)
    else:
        # entrywise relative draws of size eps/2 give at most eps/2 * sqrt(d) in spectral norm
        eff = 0.5 * model.epsilon * np.sqrt(channel.d)
    bound = classical_bound(k, eff)
    dev = abs(Le - L0)
    if dev > bound * (1 + 1e-9) + 1e-15:
        raise ArithmeticError(f"measured deviation {dev:.3e} exceeds bound {bound:.3e}")
    return FpDeviation(L0, Le, dev, bound, k)


@dataclass
class ChainExperimentRow:
    k: int
    epsilon: float
    analytic_bound: float
    measured_deterministic: float
    measured_stochastic_mean: float
    measured_stochastic_std: float


def chain_experiment(ks, epsilons, d: int = 4, seed: int = 0, stochastic_samples: int = 20) -> list:
    """Error of injected chain products of Haar unitaries against the analytic bound."""
    rows = []
    root = RngStream(seed, (0,))
    for k in ks:
        mats = [haar_unitary(d, root.child(int(k), j)) for j in range(int(k))]
        for eps in epsilons:
            det = relative_chain_error(mats, FpErrorModel(eps, "deterministic_diagonal"))
            sto = [relative_chain_error(mats, FpErrorModel(eps, "stochastic_uniform", root.child(int(k), 10**6 + s)))
                   for s in range(stochastic_samples)]
            rows.append(ChainExperimentRow(int(k), float(eps), chain_bound(int(k), d, eps), det,
                                           float(np.mean(sto)), float(np.std(sto))))
    return rows


__all__ = [
    "ChainExperimentRow",
    "ErrorBound",
    "FpDeviation",
    "FpErrorModel",
    "accumulated_addition_error",
    "chain_bound",
    "chain_experiment",
    "classical_bound",
    "error_bounds",
    "linearized_bounds",
    "noisy_chain_multiply",
    "noisy_evolution_infidelity",
    "quantum_bound",
    "relative_chain_error",
    "sigma_matrix",
    "sigma_norm",
]
