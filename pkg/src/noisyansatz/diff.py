"""Adjoint gradients, finite-difference and parameter-shift oracles, Hessians,
quantum Fisher information, numerical rank and Lie-algebra closure."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ansatz import GeneratorSet, NmrModel, apply_constraints, build_generators, gate_sequence
from .channels import LayeredChannel, NoiseModel, evolve_unitary
from .linalg import dagger, schatten_norm

MACHINE_EPS = 2.2e-16


@dataclass
class GradientVector:
    partials: np.ndarray
    objective_kind: str


class ControlProblem:
    """Objective of the raw control variables for a fixed model, noise, mode and task."""

    def __init__(self, model: NmrModel, noise: NoiseModel, mode: str, objective,
                 gens: GeneratorSet | None = None):
        self.model = model
        self.noise = noise
        self.mode = mode
        self.objective = objective
        self.gens = build_generators(model) if gens is None else gens

    @property
    def P(self) -> int:
        return 2 * self.model.M * (self.model.N if self.mode == "unconstrained" else 1)

    def channel(self, raw) -> LayeredChannel:
        return LayeredChannel(self.model, self.noise, apply_constraints(raw, self.model, self.mode), self.gens)

    def value(self, raw) -> float:
        return self.objective.value(self.channel(raw))

    def value_and_grad(self, raw) -> tuple[float, np.ndarray]:
        ch = self.channel(raw)
        val, grad = value_and_gradient(ch, self.objective)
        return val, grad.reshape(-1)


def _coefficient_gradient(channel: LayeredChannel, B: np.ndarray) -> np.ndarray:
    """d/dcoeff[m, mu] of Re-linear objective pieces 2 Re tr(dU_m B_m), shape (M, n_gen)."""
    model = channel.model
    gens = channel.gens
    seq, frac = gate_sequence(len(gens), model.Q)
    g = channel.gate_stack()
    L = len(seq)
    U = channel.unitaries
    out = np.zeros((model.M, len(gens)))
    D = B @ U @ dagger(g[L - 1])
    for j in range(L - 1, -1, -1):
        C = g[j] @ D
        t = np.einsum("ij,mji->m", gens.ops[seq[j]], C)
        out[:, seq[j]] += model.tau * frac[j] * 2.0 * np.real(-1j * t)
        if j > 0:
            D = C @ dagger(g[j - 1])
    return out


def value_and_gradient(channel: LayeredChannel, objective) -> tuple[float, np.ndarray]:
    """Objective value and its gradient with respect to the raw variables of the trajectory."""
    final, cache = channel.forward(objective.inputs, store=True)
    value = 1.0 + objective.scale * float(np.real(np.einsum("bij,bji->", objective.observables, final)))
    post = channel.backward(objective.observables)
    U = channel.unitaries
    Uh = dagger(U)
    X = np.array(cache)  # (M, B, d, d)
    O = np.array(post)
    B = np.einsum("mbij,mjk,mbkl->mil", X, Uh, O, optimize=True)
    dcoeff = objective.scale * _coefficient_gradient(channel, B)
    gens = channel.gens
    fields_grad = np.zeros_like(channel.trajectory.fields)
    var = np.flatnonzero(gens.variable)
    np.add.at(fields_grad, (slice(None), gens.channel_of[var]), dcoeff[:, var])
    return value, channel.trajectory.chain_rule(fields_grad)


def gradient(channel: LayeredChannel, objective) -> GradientVector:
    _, g = value_and_gradient(channel, objective)
    return GradientVector(g.reshape(-1), objective.kind)


def finite_difference_gradient(problem: ControlProblem, raw, step: float = 1e-5) -> GradientVector:
    if step <= 0:
        raise ValueError("step must be positive")
    raw = np.asarray(raw, dtype=float).reshape(-1)
    g = np.zeros_like(raw)
    for p in range(raw.size):
        e = np.zeros_like(raw)
        e[p] = step
        g[p] = (problem.value(raw + e) - problem.value(raw - e)) / (2 * step)
    return GradientVector(g, problem.objective.kind)


def parameter_shift(f, theta, index: int, zeta: float, order: int = 1) -> float:
    """k-th derivative along one parameter of f for a generator with eigenvalues +-zeta."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    phi = np.pi / (4 * zeta)
    total = 0.0
    for l in range(order + 1):
        e = np.zeros_like(theta)
        e[index] = (order - 2 * l) * phi
        total += (-1) ** l * math.comb(order, l) * f(theta + e)
    return zeta**order * total


@dataclass
class HessianResult:
    matrix: np.ndarray
    asymmetry: float


def hessian(problem: ControlProblem, raw, step: float = 1e-5, memory_cap_bytes: float = 2e9) -> HessianResult:
    """Forward differences of the analytic gradient, symmetrized."""
    raw = np.asarray(raw, dtype=float).reshape(-1)
    P = raw.size
    need = 8.0 * P * P
    if need > memory_cap_bytes:
        raise MemoryError(f"Hessian of {P} parameters needs {need / 1e9:.2f} GB, cap is {memory_cap_bytes / 1e9:.2f} GB")
    _, g0 = problem.value_and_grad(raw)
    H = np.zeros((P, P))
    for p in range(P):
        e = np.zeros(P)
        e[p] = step
        H[:, p] = (problem.value_and_grad(raw + e)[1] - g0) / step
    asym = float(np.abs(H - H.T).max()) if P else 0.0
    return HessianResult((H + H.T) / 2, asym)


# Fisher information ----------------------------------------------------------


def unitary_tangents(channel: LayeredChannel) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian A_p with dU/draw_p = -i U A_p, shape (P, d, d), and the full unitary U."""
    if channel.noise.active:
        raise ValueError("tangents are defined for the noiseless ansatz")
    model = channel.model
    gens = channel.gens
    seq, frac = gate_sequence(len(gens), model.Q)
    g = channel.gate_stack()
    d = model.d
    L = len(seq)
    n_ch = channel.trajectory.fields.shape[1]
    T = np.zeros((model.M, n_ch, d, d), dtype=complex)
    W = np.eye(d, dtype=complex)
    for m in range(model.M):
        for j in range(L - 1, -1, -1):  # application order is right to left
            mu = seq[j]
            c = gens.channel_of[mu]
            if c >= 0:
                T[m, c] += model.tau * frac[j] * (dagger(W) @ gens.ops[mu] @ W)
            W = g[j, m] @ W
    A = channel.trajectory.chain_rule(T)
    return A.reshape((-1, d, d)), W


def fisher_from_tangents(A: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Re(tr(w A_p A_q) - tr(w A_p) tr(w A_q)) for a density-matrix weight w."""
    WA = weight @ A
    first = np.einsum("pij,qji->pq", WA, A)
    means = np.einsum("pii->p", WA)
    F = np.real(first - np.outer(means, means))
    return (F + F.T) / 2


@dataclass
class FisherMatrix:
    entries: np.ndarray
    flavor: str


def fisher_unitary(channel: LayeredChannel) -> FisherMatrix:
    A, _ = unitary_tangents(channel)
    d = channel.d
    return FisherMatrix(fisher_from_tangents(A, np.eye(d) / d), "unitary")


def fisher_state(channel: LayeredChannel, sigma: np.ndarray) -> FisherMatrix:
    if abs(np.real(np.trace(sigma @ sigma)) - 1) > 1e-10:
        raise ValueError("state Fisher information needs a pure initial state")
    A, _ = unitary_tangents(channel)
    return FisherMatrix(fisher_from_tangents(A, sigma), "state")


@dataclass
class RankEstimate:
    rank: int
    spectrum: np.ndarray
    threshold_rule: str


def numerical_rank(matrix: np.ndarray, P: int | None = None, machine_eps: float = MACHINE_EPS) -> RankEstimate:
    S = np.asarray(matrix, dtype=float)
    if np.abs(S - S.T).max(initial=0.0) > 1e-8 * max(1.0, np.abs(S).max(initial=0.0)):
        raise ValueError("matrix must be symmetric")
    P = S.shape[0] if P is None else P
    w = np.sort(np.linalg.eigvalsh((S + S.T) / 2))[::-1]
    rule = f"lambda/lambda_max > {P}*{machine_eps:g}"
    top = np.abs(w).max(initial=0.0)
    if top == 0:
        return RankEstimate(0, w, rule)
    # magnitudes, so indefinite matrices (Hessians off the optimum) are ranked correctly
    return RankEstimate(int(np.sum(np.abs(w) / top > P * machine_eps)), w, rule)


# Lie closure -----------------------------------------------------------------


@dataclass
class LieClosure:
    basis: list
    dimension: int
    closed: bool


def lie_closure(generators, max_dim: int | None = None, tol: float = 1e-10) -> LieClosure:
    """Dimension of the real Lie algebra spanned by nested commutators i[A, B] of the generators."""
    ops = generators.ops if isinstance(generators, GeneratorSet) else np.asarray(generators)
    d = ops.shape[-1]
    max_dim = d * d if max_dim is None else max_dim
    basis: list = []

    def add(op) -> bool:
        v = op.copy()
        for _ in range(2):
            for b in basis:
                v = v - np.real(np.trace(b @ v)) * b
        if schatten_norm(v, 1) <= tol * max(schatten_norm(op, 1), 1e-300):
            return False
        basis.append(v / np.sqrt(np.real(np.trace(v @ v))))
        return True

    for G in ops:
        add((G + G.conj().T) / 2)
        if len(basis) > max_dim:
            return LieClosure(basis[:max_dim], max_dim, False)
    i = 0
    while i < len(basis):
        for j in range(i):
            add(1j * (basis[i] @ basis[j] - basis[j] @ basis[i]))
            if len(basis) > max_dim:
                return LieClosure(basis[:max_dim], max_dim, False)
        i += 1
    return LieClosure(basis, len(basis), True)


__all__ = [
    "ControlProblem",
    "FisherMatrix",
    "GradientVector",
    "HessianResult",
    "LieClosure",
    "RankEstimate",
    "evolve_unitary",
    "finite_difference_gradient",
    "fisher_from_tangents",
    "fisher_state",
    "fisher_unitary",
    "gradient",
    "hessian",
    "lie_closure",
    "numerical_rank",
    "parameter_shift",
    "unitary_tangents",
    "value_and_gradient",
]
