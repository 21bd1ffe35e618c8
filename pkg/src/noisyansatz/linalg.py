"""Dense complex linear algebra helpers, Hermitian matrix functions and Haar sampling."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
LOG_FLOOR = 1e-300

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True)
class HermitianEigen:
    """Eigendecomposition H = V diag(w) V^dagger with ascending w."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply(self, f) -> np.ndarray:
        V = self.eigenvectors
        return (V * f(self.eigenvalues)) @ V.conj().T

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda w: w)


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by a seed and a path of child indices."""

    seed: int
    path: tuple = ()

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.seed, tuple(self.path) + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) % 2**64, spawn_key=tuple(self.path))
        return np.random.default_rng(ss)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def dagger(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A, -1, -2).conj()


def hermiticity_error(H: np.ndarray) -> float:
    return float(np.linalg.norm(H - dagger(H)))


def check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    err = hermiticity_error(H)
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian: |H - H^dagger|_F = {err:.3e}")
    return H


def hermitian_eigen(H: np.ndarray) -> HermitianEigen:
    H = check_hermitian(H)
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    return HermitianEigen(w, V)


def hermitian_expm(H: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * H) through the eigendecomposition of the Hermitian H."""
    eig = hermitian_eigen(H)
    return eig.apply(lambda w: np.exp(scale * w))


def _psd_eigen(rho: np.ndarray) -> HermitianEigen:
    eig = hermitian_eigen(rho)
    if eig.eigenvalues[0] < -PSD_TOL:
        raise NotPSDError(f"matrix is not PSD: min eigenvalue {eig.eigenvalues[0]:.3e}")
    return eig


def matrix_log(rho: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    eig = _psd_eigen(rho)
    return eig.apply(lambda w: np.log(np.maximum(w, floor)))


def matrix_power_psd(rho: np.ndarray, power: float, support_tol: float = 1e-14) -> np.ndarray:
    """rho**power on the support of rho; negative powers act as pseudo-inverses."""
    eig = _psd_eigen(rho)
    w = eig.eigenvalues
    keep = w > support_tol
    out = np.zeros_like(w)
    out[keep] = w[keep] ** power
    return eig.apply(lambda _: out)


def xlogx_sum(w: np.ndarray) -> float:
    """sum(w log w) with the 0 log 0 = 0 convention."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos])))


def schatten_norm(A: np.ndarray, p: float = 2) -> float:
    if p < 1:
        raise ValueError(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)
    if np.isinf(p):
        return float(s.max()) if s.size else 0.0
    return float(np.sum(s**p) ** (1.0 / p))


def haar_unitary(d: int, rng) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    gen = _as_generator(rng)
    Z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def haar_pure_state(d: int, rng) -> np.ndarray:
    psi = haar_unitary(d, rng)[:, 0]
    return np.outer(psi, psi.conj())


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, ops, np.eye(1, dtype=complex))


def embed(op: np.ndarray, sites: Sequence[int], n_qubits: int) -> np.ndarray:
    """Embed a k-local qubit operator acting on `sites` (sorted, contiguous in op order)."""
    sites = list(sites)
    k = len(sites)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator size does not match number of sites")
    if k == 1:
        ops = [PAULI_I] * n_qubits
        ops[sites[0]] = op
        return kron_all(ops)
    # general case: permute a tensor-product embedding
    d = 2**n_qubits
    rest = [q for q in range(n_qubits) if q not in sites]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    order = sites + rest
    perm = np.argsort(order)
    T = full.reshape([2] * (2 * n_qubits))
    T = T.transpose(list(perm) + [n_qubits + p for p in perm])
    return T.reshape(d, d)


def pauli_string(labels: str) -> np.ndarray:
    return kron_all([PAULIS[c] for c in labels])


def pauli_basis(n_qubits: int) -> tuple[list[str], np.ndarray]:
    """All non-identity Pauli strings on n qubits; tr(w_a w_b) = d delta_ab."""
    labels = [""]
    for _ in range(n_qubits):
        labels = [s + c for s in labels for c in "IXYZ"]
    labels = [s for s in labels if set(s) != {"I"}]
    return labels, np.array([pauli_string(s) for s in labels])


def random_hermitian(d: int, rng) -> np.ndarray:
    gen = _as_generator(rng)
    A = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return (A + A.conj().T) / 2


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    gen = _as_generator(rng)
    r = d if rank is None else rank
    G = gen.standard_normal((d, r)) + 1j * gen.standard_normal((d, r))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real
