"""Piecewise exponential/power-law fits locating the noise-induced critical depth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

VARIANCE_FLOOR = 1e-6
TREND_TOL = 1e-10  # slopes below this (log units) count as flat


@dataclass
class LineFit:
    coef: np.ndarray  # (intercept, slope)
    cov: np.ndarray
    ssr: float


@dataclass
class GammaFit:
    gamma: float
    breakpoint: float | None
    breakpoint_err: float
    rate: float  # exponential decay rate before the breakpoint
    exponent: float  # power-law exponent after it
    residual: float
    flagged: bool
    reason: str = ""


@dataclass
class FitResult:
    per_gamma: list = field(default_factory=list)
    slope: float = float("nan")
    intercept: float = float("nan")
    slope_err: float = float("nan")
    intercept_err: float = float("nan")
    r2: float = float("nan")

    def breakpoints(self) -> dict:
        return {g.gamma: g.breakpoint for g in self.per_gamma}


def _line(x, y, var=None) -> LineFit:
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    ssr = float(r @ r)
    dof = len(x) - 2
    s2 = ssr / dof if dof > 0 else 0.0
    if var is not None:
        s2 = max(s2, float(np.mean(var)))
    s2 = max(s2, VARIANCE_FLOOR)
    cov = s2 * np.linalg.pinv(X.T @ X)
    return LineFit(coef, cov, ssr)


def _intersection(exp_fit: LineFit, pow_fit: LineFit, lo: float, hi: float) -> float | None:
    a, slope = exp_fit.coef
    c, b = pow_fit.coef

    def f(M):
        return a + slope * M - c - b * np.log(M)

    grid = np.linspace(lo, hi, 257)
    vals = f(grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        return None
    # the crossing nearest the middle of the search window
    mid = 0.5 * (lo + hi)
    i = idx[np.argmin(np.abs(grid[idx] - mid))]
    return float(brentq(f, grid[i], grid[i + 1]))


def fit_single_gamma(M, L, gamma: float, std=None, counts=None, min_side: int = 2) -> GammaFit:
    """Scan every split of the depth grid and keep the one with the smallest total residual."""
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    order = np.argsort(M)
    M, L = M[order], L[order]
    if M.size < 2 * min_side:
        raise ValueError(f"need at least {2 * min_side} depths, got {M.size}")
    if np.any(L <= 0):
        raise ValueError("objectives must be positive for log fits")
    y = np.log(L)
    var = None
    if std is not None:
        s = np.asarray(std, dtype=float)[order]
        n = np.ones_like(s) if counts is None else np.asarray(counts, dtype=float)[order]
        var = (s / (L * np.sqrt(n))) ** 2
    best = None
    for split in range(min_side, M.size - min_side + 1):
        left = slice(0, split)
        right = slice(split, None)
        e = _line(M[left], y[left], None if var is None else var[left])
        p = _line(np.log(M[right]), y[right], None if var is None else var[right])
        total = e.ssr + p.ssr
        if best is None or total < best[0]:
            best = (total, split, e, p)
    total, split, e, p = best
    rate, exponent = -float(e.coef[1]), float(p.coef[1])
    out = GammaFit(gamma, None, float("nan"), rate, exponent, float(total), True)
    if not (rate > TREND_TOL and exponent > TREND_TOL):
        out.reason = "no decrease-then-increase trend"
        return out
    bp = _intersection(e, p, M[max(split - 2, 0)], M[min(split + 1, M.size - 1)])
    if bp is None:
        bp = _intersection(e, p, M[0], M[-1])
    if bp is None:
        out.reason = "branches do not intersect inside the swept range"
        return out
    # implicit differentiation of a + s M - c - b log M = 0
    dfdM = e.coef[1] - p.coef[1] / bp
    grad_e = -np.array([1.0, bp]) / dfdM
    grad_p = np.array([1.0, np.log(bp)]) / dfdM
    var_bp = float(grad_e @ e.cov @ grad_e + grad_p @ p.cov @ grad_p)
    out.breakpoint = bp
    out.breakpoint_err = float(np.sqrt(max(var_bp, 0.0)))
    out.flagged = False
    return out


def fit_critical_depth(stats) -> FitResult:
    """Per-noise-scale breakpoints, then a weighted line of breakpoint against log(1/gamma).

    ``stats`` maps gamma -> (depths, mean objectives) or (depths, means, stds, counts).
    """
    result = FitResult()
    for gamma in sorted(stats):
        entry = stats[gamma]
        M, L = entry[0], entry[1]
        std = entry[2] if len(entry) > 2 else None
        counts = entry[3] if len(entry) > 3 else None
        result.per_gamma.append(fit_single_gamma(M, L, gamma, std, counts))
    ok = [g for g in result.per_gamma if not g.flagged]
    if len(ok) < 2:
        return result
    x = np.log(1.0 / np.array([g.gamma for g in ok]))
    y = np.array([g.breakpoint for g in ok])
    err = np.array([g.breakpoint_err for g in ok])
    w = 1.0 / np.maximum(err, 1e-9 * max(1.0, np.abs(y).max())) ** 2
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * y))
    cov = np.linalg.inv(A)
    if len(ok) > 2:
        r = y - X @ coef
        chi2 = float(r @ (w * r)) / (len(ok) - 2)
        cov = cov * max(chi2, 1.0)
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * (y - X @ coef) ** 2))
    result.intercept, result.slope = float(coef[0]), float(coef[1])
    result.intercept_err, result.slope_err = (float(v) for v in np.sqrt(np.diag(cov)))
    result.r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return result


def synthetic_curve(M, rate: float, breakpoint: float, exponent: float, scale: float = 1.0) -> np.ndarray:
    """exp(-rate M) before the breakpoint, a continuous power law after it."""
    M = np.asarray(M, dtype=float)
    c = scale * np.exp(-rate * breakpoint) / breakpoint**exponent
    return np.where(M < breakpoint, scale * np.exp(-rate * M), c * M**exponent)


__all__ = ["FitResult", "GammaFit", "fit_critical_depth", "fit_single_gamma", "synthetic_curve"]
