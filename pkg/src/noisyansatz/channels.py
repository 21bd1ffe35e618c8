"""Local noise models, layered channels and the k-error decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .ansatz import (
    GeneratorSet,
    NmrModel,
    ParameterTrajectory,
    apply_constraints,
    build_generators,
    layer_gates,
    product_of_gates,
)
from .linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, dagger, embed

NOISE_KINDS = ("none", "dephasing", "depolarizing", "amplitude_damping", "amplitude_damping_paper")
TP_TOL = 1e-12
CP_TOL = 1e-10


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.gamma > 0


class KrausChannel:
    """Single-site channel sum_k K rho K^dagger."""

    def __init__(self, ops, kind: str | None = None, check: bool = True):
        self.ops = np.asarray(ops, dtype=complex)
        self.kind = kind
        if check:
            err = self.tp_error()
            if err > TP_TOL:
                raise ValueError(f"Kraus set is not trace preserving (error {err:.2e})")
            lam = np.linalg.eigvalsh(self.choi()).min()
            if lam < -CP_TOL:
                raise ValueError(f"Kraus set is not completely positive (Choi eigenvalue {lam:.2e})")

    @property
    def dim(self) -> int:
        return self.ops.shape[-1]

    def tp_error(self) -> float:
        S = np.einsum("kji,kjl->il", self.ops.conj(), self.ops)
        return float(np.abs(S - np.eye(self.dim)).max())

    def superoperator(self) -> np.ndarray:
        """Row-major vectorized action: vec(K rho K^dagger) = (K kron K*) vec(rho)."""
        return sum(np.kron(K, K.conj()) for K in self.ops)

    def choi(self) -> np.ndarray:
        D = self.dim
        C = np.zeros((D * D, D * D), dtype=complex)
        for K in self.ops:
            v = K.reshape(-1)  # row-major: entry (a, b) -> a*D + b
            C += np.outer(v, v.conj())
        return C

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("kij,...jl,kml->...im", self.ops, rho, self.ops.conj())


class LocalMap:
    """Linear single-site map sum_k c_k K_k rho K_k^dagger (coefficients may be negative)."""

    def __init__(self, coefs, ops):
        self.coefs = np.asarray(coefs, dtype=float)
        self.ops = np.asarray(ops, dtype=complex)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("k,kij,...jl,kml->...im", self.coefs, self.ops, rho, self.ops.conj())

    def superoperator(self) -> np.ndarray:
        return sum(c * np.kron(K, K.conj()) for c, K in zip(self.coefs, self.ops))


def _choi_to_kraus(C: np.ndarray, D: int) -> np.ndarray:
    w, V = np.linalg.eigh((C + C.conj().T) / 2)
    if w.min() < -CP_TOL:
        raise ValueError(f"map is not completely positive (Choi eigenvalue {w.min():.2e})")
    ops = [np.sqrt(x) * V[:, i].reshape(D, D) for i, x in enumerate(w) if x > 1e-15]
    return np.array(ops)


def _pauli_table_amplitude_damping(gamma: float) -> np.ndarray:
    """Kraus operators of the map I -> I + gZ, X -> sqrt(1-g)X, Y -> sqrt(1-g)Y, Z -> (1-g)Z,
    mixed with the identity as (1-g) Id + g K."""
    s = np.sqrt(1 - gamma)
    images = {
        "I": PAULI_I + gamma * PAULI_Z,
        "X": s * PAULI_X,
        "Y": s * PAULI_Y,
        "Z": (1 - gamma) * PAULI_Z,
    }
    paulis = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

    def nontrivial(rho):
        out = np.zeros((2, 2), dtype=complex)
        for key, P in paulis.items():
            out += np.trace(P @ rho) / 2 * images[key]
        return out

    C = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            E = np.zeros((2, 2), dtype=complex)
            E[a, b] = 1
            out = (1 - gamma) * E + gamma * nontrivial(E)
            # same row-major Choi convention as KrausChannel.choi
            for i in range(2):
                for j in range(2):
                    C[i * 2 + a, j * 2 + b] += out[i, j]
    return _choi_to_kraus(C, 2)


def local_noise(kind: str, gamma: float) -> KrausChannel:
    NoiseModel(kind, gamma)
    g = float(gamma)
    if kind == "none":
        return KrausChannel([PAULI_I], kind)
    if kind == "dephasing":
        return KrausChannel([np.sqrt(1 - g) * PAULI_I, np.sqrt(g) * PAULI_Z], kind)
    if kind == "depolarizing":
        ops = [np.sqrt(1 - g) * PAULI_I]
        for a in range(2):
            for b in range(2):
                E = np.zeros((2, 2), dtype=complex)
                E[a, b] = np.sqrt(g / 2)
                ops.append(E)
        return KrausChannel(ops, kind)
    if kind == "amplitude_damping":
        K0 = np.diag([1.0, np.sqrt(1 - g)]).astype(complex)
        K1 = np.array([[0.0, np.sqrt(g)], [0.0, 0.0]], dtype=complex)
        return KrausChannel([K0, K1], kind)
    if kind == "amplitude_damping_paper":
        return KrausChannel(_pauli_table_amplitude_damping(g), kind)
    raise ValueError(kind)


def nontrivial_component(channel: KrausChannel, gamma: float) -> LocalMap:
    """Error part K of N = (1 - gamma) Id + gamma K."""
    if gamma <= 0:
        raise ValueError("the error component is undefined for gamma = 0")
    D = channel.dim
    if channel.kind == "dephasing":
        return LocalMap([1.0], [PAULI_Z])
    if channel.kind == "depolarizing":
        ops = []
        for a in range(D):
            for b in range(D):
                E = np.zeros((D, D), dtype=complex)
                E[a, b] = 1.0
                ops.append(E)
        return LocalMap([1.0 / D] * (D * D), ops)
    coefs = [1.0 / gamma] * len(channel.ops) + [-(1.0 - gamma) / gamma]
    ops = list(channel.ops) + [np.eye(D, dtype=complex)]
    return LocalMap(coefs, ops)


def _embed_stack(ops: np.ndarray, site: int, n: int) -> np.ndarray:
    return np.array([embed(K, [site], n) for K in ops])


@lru_cache(maxsize=64)
def _site_kraus(kind: str, gamma: float, n: int):
    kraus = local_noise(kind, gamma)
    if kind == "none" or gamma == 0:
        return kraus, [], []
    ops = [_embed_stack(kraus.ops, i, n) for i in range(n)]
    return kraus, ops, [dagger(S) for S in ops]


def _apply_stack(rho: np.ndarray, Ks: np.ndarray, Khs: np.ndarray, coefs=None) -> np.ndarray:
    out = Ks @ rho[..., None, :, :] @ Khs
    if coefs is not None:
        out = out * coefs[:, None, None]
    return out.sum(axis=-3)


class LayeredChannel:
    """Depth-M channel: each layer is a Trotterized unitary followed by local noise on every qubit."""

    def __init__(self, model: NmrModel, noise: NoiseModel, trajectory: ParameterTrajectory,
                 gens: GeneratorSet | None = None, unitaries: np.ndarray | None = None):
        self.model = model
        self.noise = noise
        self.trajectory = trajectory
        self.gens = build_generators(model) if gens is None else gens
        self.coeff = self.gens.coefficients(trajectory.fields)
        if self.coeff.shape[0] != model.M:
            raise ValueError("trajectory length does not match the model depth")
        if unitaries is None:
            self.gates = layer_gates(model, self.gens, self.coeff)
            self.unitaries = product_of_gates(self.gates)
        else:
            self.gates = None
            self.unitaries = unitaries
        self.kraus, self.site_ops, self.site_ops_h = _site_kraus(noise.kind, noise.gamma, model.N)

    @classmethod
    def from_raw(cls, model: NmrModel, noise: NoiseModel, raw, mode: str,
                 gens: GeneratorSet | None = None) -> "LayeredChannel":
        return cls(model, noise, apply_constraints(raw, model, mode), gens)

    @property
    def K(self) -> int:
        return self.model.N * self.model.M

    @property
    def d(self) -> int:
        return self.model.d

    def noiseless(self) -> "LayeredChannel":
        return self.with_noise(NoiseModel())

    def with_noise(self, noise: NoiseModel) -> "LayeredChannel":
        out = LayeredChannel(self.model, noise, self.trajectory, self.gens, self.unitaries)
        out.gates = self.gates
        return out

    def gate_stack(self) -> np.ndarray:
        if self.gates is None:
            self.gates = layer_gates(self.model, self.gens, self.coeff)
        return self.gates

    def noise_layer(self, rho: np.ndarray) -> np.ndarray:
        for Ks, Khs in zip(self.site_ops, self.site_ops_h):
            rho = _apply_stack(rho, Ks, Khs)
        return rho

    def noise_layer_adjoint(self, obs: np.ndarray) -> np.ndarray:
        for Ks, Khs in zip(reversed(self.site_ops), reversed(self.site_ops_h)):
            obs = _apply_stack(obs, Khs, Ks)
        return obs

    def forward(self, sigma: np.ndarray, store: bool = False):
        """Evolve (a batch of) operators; optionally keep the input of every layer."""
        rho = np.asarray(sigma, dtype=complex)
        U = self.unitaries
        Uh = dagger(U)
        cache = [] if store else None
        for m in range(self.model.M):
            if store:
                cache.append(rho)
            rho = U[m] @ rho @ Uh[m]
            if self.site_ops:
                rho = self.noise_layer(rho)
        if store:
            return rho, cache
        return rho

    def backward(self, obs: np.ndarray) -> list:
        """Heisenberg-picture sweep; entry m is the observable just after the unitary of layer m."""
        O = np.asarray(obs, dtype=complex)
        U = self.unitaries
        Uh = dagger(U)
        out = [None] * self.model.M
        for m in range(self.model.M - 1, -1, -1):
            if self.site_ops:
                O = self.noise_layer_adjoint(O)
            out[m] = O
            O = Uh[m] @ O @ U[m]
        return out


def _check_state(channel: LayeredChannel, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    d = channel.d
    if sigma.shape[-2:] != (d, d):
        raise ValueError(f"state has shape {sigma.shape[-2:]}, channel dimension is {d}")
    return sigma


def evolve(channel: LayeredChannel, sigma: np.ndarray) -> np.ndarray:
    return channel.forward(_check_state(channel, sigma))


def evolve_unitary(channel: LayeredChannel) -> np.ndarray:
    U = np.eye(channel.d, dtype=complex)
    for Um in channel.unitaries:
        U = Um @ U
    return U


@dataclass(frozen=True)
class ErrorPattern:
    """One bit per error site; site index m * N + i for layer m, qubit i."""

    bits: tuple

    @property
    def K(self) -> int:
        return len(self.bits)

    @property
    def weight(self) -> int:
        return int(sum(self.bits))

    @classmethod
    def from_index(cls, index: int, K: int) -> "ErrorPattern":
        return cls(tuple((index >> s) & 1 for s in range(K)))

    @classmethod
    def from_sites(cls, sites, K: int) -> "ErrorPattern":
        bits = [0] * K
        for s in sites:
            bits[s] = 1
        return cls(tuple(bits))


def pinned_channel(channel: LayeredChannel, pattern: ErrorPattern, sigma: np.ndarray) -> np.ndarray:
    """Evolution with the error component at set sites and the identity elsewhere."""
    if pattern.K != channel.K:
        raise ValueError(f"pattern length {pattern.K} does not match K = {channel.K}")
    sigma = _check_state(channel, sigma)
    N = channel.model.N
    K_map = nontrivial_component(local_noise(channel.noise.kind, channel.noise.gamma), channel.noise.gamma) \
        if pattern.weight else None
    stacks = {}
    rho = sigma
    U = channel.unitaries
    for m in range(channel.model.M):
        rho = U[m] @ rho @ dagger(U[m])
        for i in range(N):
            if pattern.bits[m * N + i]:
                if i not in stacks:
                    Ks = _embed_stack(K_map.ops, i, N)
                    stacks[i] = (Ks, dagger(Ks))
                rho = _apply_stack(rho, *stacks[i], coefs=K_map.coefs)
    return rho


def k_error_channel(channel: LayeredChannel, k: int, sigma: np.ndarray) -> np.ndarray:
    """Uniform mixture over all patterns with exactly k errors."""
    K = channel.K
    total = None
    count = 0
    for sites in combinations(range(K), k):
        out = pinned_channel(channel, ErrorPattern.from_sites(sites, K), sigma)
        total = out if total is None else total + out
        count += 1
    return total / count


def pattern_sum(channel: LayeredChannel, sigma: np.ndarray) -> np.ndarray:
    """Sum over all 2^K patterns weighted by gamma^k (1 - gamma)^(K - k), in index order."""
    K = channel.K
    g = channel.noise.gamma
    total = np.zeros_like(_check_state(channel, sigma), dtype=complex)
    for idx in range(2**K):
        pat = ErrorPattern.from_index(idx, K)
        w = g**pat.weight * (1 - g) ** (K - pat.weight)
        if w == 0:
            continue
        total = total + w * pinned_channel(channel, pat, sigma)
    return total


def first_order_deviation(channel: LayeredChannel, sigma: np.ndarray) -> np.ndarray:
    """Sum over single-error patterns of (pinned - noiseless) evolution."""
    K = channel.K
    base = pinned_channel(channel, ErrorPattern.from_index(0, K), sigma)
    total = np.zeros_like(base)
    for s in range(K):
        total += pinned_channel(channel, ErrorPattern.from_sites([s], K), sigma) - base
    return total


@dataclass(frozen=True)
class ErrorCountDistribution:
    K: int
    gamma: float

    @property
    def mean(self) -> float:
        return self.K * self.gamma

    @property
    def variance(self) -> float:
        return self.K * self.gamma * (1 - self.gamma)

    def _check(self, k):
        if not 0 <= k <= self.K:
            raise ValueError(f"k must lie in [0, {self.K}], got {k}")

    def pmf(self, k: int) -> float:
        self._check(k)
        return math.comb(self.K, k) * self.gamma**k * (1 - self.gamma) ** (self.K - k)

    def gaussian_approx(self, k: float) -> float:
        self._check(k)
        var = self.variance
        return float(np.exp(-((k - self.mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var))

    def poisson_approx(self, k: int) -> float:
        self._check(k)
        lam = self.mean
        return float(np.exp(k * np.log(lam) - lam - math.lgamma(k + 1))) if lam > 0 else float(k == 0)

    def pmf_table(self) -> np.ndarray:
        return np.array([self.pmf(k) for k in range(self.K + 1)])


def error_count_pmf(dist: ErrorCountDistribution, k: int) -> float:
    return dist.pmf(k)


def gaussian_approx(dist: ErrorCountDistribution, k: float) -> float:
    return dist.gaussian_approx(k)


def poisson_approx(dist: ErrorCountDistribution, k: int) -> float:
    return dist.poisson_approx(k)


def noisy_scale(K: int, gamma: float) -> float:
    """Probability of at least one error among K sites."""
    return 1.0 - (1.0 - gamma) ** K
