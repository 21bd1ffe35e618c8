"""NMR control Hamiltonian, Trotterized layers and the control-field parameterization."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.interpolate import CubicSpline

from .linalg import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    RngStream,
    _as_generator,
    embed,
    hermitian_eigen,
    hermitian_expm,
)

HZ_TO_RAD_S = np.pi / 2

# Field tables in Hz (couplings over site pairs (0,1), (0,2), ... lexicographic;
# longitudinal fields in kHz; bound in MHz), scaled by pi/2 into rad/s.
TABLE_J_HZ = (72.4, -130.0, 50.0, 210.0, 20.0, -190.0, -30.0, 60.0, 90.0, -60.0)
TABLE_H_KHZ = (-10.0, 0.0, -1.0, 29.0, -20.0)
TABLE_THETA_BAR_MHZ = 1.0
TAU_COMPILE = 100e-6
TAU_PREPARE = 75e-6

MODES = ("unconstrained", "constrained")


@dataclass(frozen=True)
class NmrModel:
    """Static description of the controlled NMR register. Rates in rad/s, tau in s."""

    N: int
    M: int
    tau: float
    Q: int = 2
    J: np.ndarray = field(default=None)
    h: np.ndarray = field(default=None)
    theta_bar: float = TABLE_THETA_BAR_MHZ * 1e6 * HZ_TO_RAD_S

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.Q not in (1, 2):
            raise ValueError(f"unsupported spatial Trotter order Q={self.Q}")
        J = np.zeros((self.N, self.N)) if self.J is None else np.triu(np.asarray(self.J, float), 1)
        h = np.zeros(self.N) if self.h is None else np.asarray(self.h, float)
        if J.shape != (self.N, self.N) or h.shape != (self.N,):
            raise ValueError("J must be N x N and h length N")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(h))):
            raise ValueError("J and h must be finite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @property
    def d(self) -> int:
        return 2**self.N

    @property
    def sites(self) -> int:
        return self.N * self.M

    @classmethod
    def table_defaults(cls, N: int, M: int, tau: float = TAU_COMPILE, Q: int = 2) -> "NmrModel":
        """Register built from the tabulated couplings and fields (first N spins)."""
        if N > 5:
            raise ValueError("tabulated constants cover at most 5 spins")
        J = np.zeros((N, N))
        for value, (i, j) in zip(TABLE_J_HZ, combinations(range(5), 2)):
            if j < N:
                J[i, j] = value * HZ_TO_RAD_S
        h = np.array(TABLE_H_KHZ[:N]) * 1e3 * HZ_TO_RAD_S
        return cls(N=N, M=M, tau=tau, Q=Q, J=J, h=h)

    def with_depth(self, M: int) -> "NmrModel":
        return NmrModel(self.N, M, self.tau, self.Q, self.J, self.h, self.theta_bar)


@dataclass(frozen=True)
class Generator:
    label: str
    op: np.ndarray
    channel: int | None  # per-qubit control channel index, None for fixed terms
    coefficient: float = 0.0


class GeneratorSet:
    """Ordered generators; the order defines the Trotter product."""

    def __init__(self, generators: list[Generator], n_qubits: int):
        self.generators = list(generators)
        self.n_qubits = n_qubits
        self.ops = np.array([g.op for g in self.generators])
        self.eigen = [hermitian_eigen(g.op) for g in self.generators]
        self.eigvals = np.array([e.eigenvalues for e in self.eigen])
        self.eigvecs = np.array([e.eigenvectors for e in self.eigen])
        self.variable = np.array([g.channel is not None for g in self.generators])
        self.channel_of = np.array([-1 if g.channel is None else g.channel for g in self.generators])
        self.fixed = np.array([g.coefficient for g in self.generators], dtype=float)
        self.n_channels = int(self.channel_of.max()) + 1 if self.variable.any() else 0

    def __len__(self):
        return len(self.generators)

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.generators]

    def coefficients(self, fields: np.ndarray) -> np.ndarray:
        """Per-step generator coefficients from per-qubit control fields of shape (M, channels)."""
        fields = np.atleast_2d(fields)
        coeff = np.broadcast_to(self.fixed, (fields.shape[0], len(self))).copy()
        var = self.variable
        coeff[:, var] = fields[:, self.channel_of[var]]
        return coeff


def build_generators(model: NmrModel) -> GeneratorSet:
    N = model.N
    gens = []
    for i in range(N):
        gens.append(Generator(f"X{i}", embed(PAULI_X, [i], N), i))
    for i in range(N):
        gens.append(Generator(f"Y{i}", embed(PAULI_Y, [i], N), N + i))
    for i in range(N):
        gens.append(Generator(f"Z{i}", embed(PAULI_Z, [i], N), None, float(model.h[i])))
    ZZ = np.kron(PAULI_Z, PAULI_Z)
    for i, j in combinations(range(N), 2):
        gens.append(Generator(f"Z{i}Z{j}", embed(ZZ, [i, j], N), None, float(model.J[i, j])))
    return GeneratorSet(gens, N)


def gate_sequence(n_generators: int, Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Generator indices of a layer in matrix-product order, with their time fractions."""
    fwd = np.arange(n_generators)
    if Q == 1:
        return fwd, np.ones(n_generators)
    if Q == 2:
        return np.concatenate([fwd, fwd[::-1]]), np.full(2 * n_generators, 0.5)
    raise ValueError(f"unsupported spatial Trotter order Q={Q}")


def gate_matrices(gens: GeneratorSet, angles: np.ndarray, index: int) -> np.ndarray:
    """exp(-i a G) for a batch of angles a and a single generator."""
    V = gens.eigvecs[index]
    w = gens.eigvals[index]
    phase = np.exp(-1j * np.multiply.outer(angles, w))
    return (V * phase[..., None, :]) @ V.conj().T


def layer_gates(model: NmrModel, gens: GeneratorSet, coeff: np.ndarray) -> np.ndarray:
    """Gate matrices of every layer, shape (L, M, d, d), in matrix-product order."""
    coeff = np.atleast_2d(coeff)
    seq, frac = gate_sequence(len(gens), model.Q)
    return np.array([gate_matrices(gens, model.tau * f * coeff[:, mu], mu) for mu, f in zip(seq, frac)])


def product_of_gates(gates: np.ndarray) -> np.ndarray:
    U = gates[0]
    for g in gates[1:]:
        U = U @ g
    return U


def layer_unitaries(model: NmrModel, gens: GeneratorSet, coeff: np.ndarray) -> np.ndarray:
    """Batched layer unitaries, shape (M, d, d), from per-step coefficients (M, n_gen)."""
    return product_of_gates(layer_gates(model, gens, coeff))


def layer_unitary(model: NmrModel, gens: GeneratorSet, theta_m: np.ndarray) -> np.ndarray:
    """Single layer from the per-qubit control fields of one time step."""
    coeff = gens.coefficients(np.asarray(theta_m, float)[None, :])
    return layer_unitaries(model, gens, coeff)[0]


def free_parameter_count(model: NmrModel, mode: str) -> int:
    if mode == "unconstrained":
        return 2 * model.N * model.M
    if mode == "constrained":
        return 2 * model.M
    raise ValueError(f"unknown mode {mode!r}")


def boundary_envelope(M: int) -> np.ndarray:
    """Sine window over the step midpoints; vanishes at the start and end of the pulse."""
    return np.sin(np.pi * (np.arange(M) + 0.5) / M)


@dataclass(frozen=True)
class ParameterTrajectory:
    """Raw optimization variables together with the per-qubit fields they produce.

    ``raw`` has shape (M, 2N) in unconstrained mode and (M, 2) in constrained mode
    (columns x, y). ``fields`` always has shape (M, 2N): x fields of qubits 0..N-1
    followed by the y fields.
    """

    raw: np.ndarray
    fields: np.ndarray
    mode: str
    theta_bar: float

    @property
    def P(self) -> int:
        return int(self.raw.size)

    def chain_rule(self, grad_fields: np.ndarray) -> np.ndarray:
        """Map derivatives with respect to the fields, shape (M, 2N, ...), onto the raw variables."""
        grad_fields = np.asarray(grad_fields)
        if self.mode == "unconstrained":
            return grad_fields.copy()
        M = self.raw.shape[0]
        N = self.fields.shape[1] // 2
        t = np.tanh(self.raw / self.theta_bar)
        scale = (1 - t**2) * boundary_envelope(M)[:, None]
        summed = np.stack([grad_fields[:, :N].sum(1), grad_fields[:, N:].sum(1)], axis=1)
        return summed * scale.reshape(scale.shape + (1,) * (summed.ndim - 2))


def apply_constraints(raw, model: NmrModel, mode: str) -> ParameterTrajectory:
    if isinstance(raw, ParameterTrajectory):
        if raw.mode != mode:
            raise ValueError("trajectory already carries a different mode")
        return raw
    raw = np.asarray(raw, dtype=float)
    P = free_parameter_count(model, mode)
    if raw.size != P:
        raise ValueError(f"expected {P} raw values for mode {mode!r}, got {raw.size}")
    N, M = model.N, model.M
    if mode == "unconstrained":
        raw = raw.reshape(M, 2 * N)
        return ParameterTrajectory(raw, raw.copy(), mode, model.theta_bar)
    raw = raw.reshape(M, 2)
    bounded = model.theta_bar * np.tanh(raw / model.theta_bar) * boundary_envelope(M)[:, None]
    fields = np.repeat(bounded, N, axis=1)
    return ParameterTrajectory(raw, fields, mode, model.theta_bar)


def knot_count(M: int) -> int:
    return int(np.ceil(M / 8))


def smooth_draw(M: int, channels: int, scale: float, rng) -> np.ndarray:
    """Uniform knot values on a coarse grid, cubic-interpolated onto M steps."""
    gen = _as_generator(rng)
    n = knot_count(M)
    knots = gen.uniform(-scale, scale, size=(n, channels))
    if n == 1:
        return np.repeat(knots, M, axis=0)
    x = np.linspace(0.0, M - 1.0, n)
    spline = CubicSpline(x, knots, axis=0, bc_type="natural")
    out = spline(np.arange(M, dtype=float))
    # keep the draw inside the sampling box
    return np.clip(out, -scale, scale)


def init_parameters(model: NmrModel, mode: str, rng) -> ParameterTrajectory:
    channels = 2 * model.N if mode == "unconstrained" else 2
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    raw = smooth_draw(model.M, channels, model.theta_bar, rng)
    return apply_constraints(raw.ravel(), model, mode)


def exact_layer(model: NmrModel, gens: GeneratorSet, theta_m: np.ndarray) -> np.ndarray:
    """Exact exponential of the full per-step Hamiltonian (Trotter-error oracle)."""
    coeff = gens.coefficients(np.asarray(theta_m, float)[None, :])[0]
    H = np.tensordot(coeff, gens.ops, axes=1)
    return hermitian_expm(H, -1j * model.tau)


__all__ = [
    "NmrModel",
    "Generator",
    "GeneratorSet",
    "ParameterTrajectory",
    "RngStream",
    "apply_constraints",
    "boundary_envelope",
    "build_generators",
    "exact_layer",
    "free_parameter_count",
    "gate_sequence",
    "init_parameters",
    "layer_unitaries",
    "layer_unitary",
]
