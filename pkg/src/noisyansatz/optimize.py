"""Nonlinear conjugate gradient with a strong-Wolfe line search and Hestenes-Stiefel updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STOP_REASONS = ("objective_floor", "max_iters", "relative_increase", "gradient_floor", "linesearch_fail")


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    min_iters: int = 50
    max_linesearch: int = 2500
    alpha0: float = 1e-4
    beta0: float = 1e-4
    alpha_bounds: tuple = (0.0, np.inf)
    beta_bounds: tuple = (1e-10, 1e10)
    c1: float = 1e-4
    c2: float = 0.9
    eps_objective: float = 1e-16
    eps_delta_objective: float = 0.0
    eps_rel_objective: float = 1e-3
    eps_gradient: float = 0.0
    eps_delta_gradient: float = 0.0
    eps_rel_gradient: float = np.inf
    expansion: float = 4.0

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.min_iters > self.max_iters:
            raise ValueError("min_iters must not exceed max_iters")


@dataclass
class LineSearchResult:
    success: bool
    alpha: float
    f: float
    g: np.ndarray
    evaluations: int


class WolfeViolation(AssertionError):
    pass


def strong_wolfe_ok(f0, d0, f1, d1, alpha, c1, c2) -> tuple[bool, bool]:
    return f1 <= f0 + c1 * alpha * d0, abs(d1) <= c2 * abs(d0)


def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi) -> float:
    """Cubic interpolation minimizer in [a_lo, a_hi], falling back to bisection."""
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    d1 = d_lo + d_hi - 3 * (f_lo - f_hi) / (a_lo - a_hi)
    rad = d1 * d1 - d_lo * d_hi
    if rad >= 0:
        d2 = np.sign(a_hi - a_lo) * np.sqrt(rad)
        denom = d_hi - d_lo + 2 * d2
        if denom != 0:
            a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
            width = hi - lo
            if np.isfinite(a) and lo + 0.1 * width <= a <= hi - 0.1 * width:
                return float(a)
    return 0.5 * (a_lo + a_hi)


def wolfe_line_search(fg, x, f0, g0, xi, alpha_init, c1=1e-4, c2=0.9, max_evals=2500,
                      expansion=4.0, alpha_max=np.inf) -> LineSearchResult:
    """Bracketing and zoom search for a step satisfying the strong Wolfe conditions."""
    d0 = float(g0 @ xi)
    if not d0 < 0:
        raise ValueError("search direction is not a descent direction")
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = fg(x + a * xi)
        return float(f), g, float(g @ xi)

    def fail():
        return LineSearchResult(False, 0.0, f0, g0, evals)

    def zoom(a_lo, f_lo, d_lo, g_lo, a_hi, f_hi, d_hi):
        while evals < max_evals:
            if abs(a_hi - a_lo) <= 1e-16 * max(abs(a_lo), abs(a_hi)):
                return fail()
            a = _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            f, g, d = phi(a)
            if not np.isfinite(f):
                a_hi, f_hi, d_hi = a, np.inf, 0.0
                continue
            if f > f0 + c1 * a * d0 or f >= f_lo:
                a_hi, f_hi, d_hi = a, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return LineSearchResult(True, a, f, g, evals)
                if d * (a_hi - a_lo) >= 0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo, g_lo = a, f, d, g
        return fail()

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, d0, g0
    a = float(alpha_init)
    first = True
    while evals < max_evals:
        f, g, d = phi(a)
        if not np.isfinite(f) or f > f0 + c1 * a * d0 or (not first and f >= f_prev):
            if not np.isfinite(f):
                f, d = np.inf, 0.0
            return zoom(a_prev, f_prev, d_prev, g_prev, a, f, d)
        if abs(d) <= -c2 * d0:
            return LineSearchResult(True, a, f, g, evals)
        if d >= 0:
            return zoom(a, f, d, g, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev, g_prev = a, f, d, g
        a = min(expansion * a, alpha_max)
        first = False
    return fail()


@dataclass
class StoppingReport:
    reason: str
    iterations: int
    best_objective: float
    final_objective: float
    final_gradient_norm: float
    evaluations: int


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    report: StoppingReport
    history: list = field(default_factory=list)


def _as_fg(problem):
    if hasattr(problem, "value_and_grad"):
        return problem.value_and_grad
    return problem


def minimize(problem, x0, config: OptimizerConfig | None = None, check_wolfe: bool = False) -> OptimizeResult:
    """Minimize with HS conjugate gradients; returns the best iterate seen.

    `problem` is either an object with ``value_and_grad(x)`` or a callable returning (f, g).
    Objective stalls (|Delta f| <= eps) are reported as ``objective_floor``; gradient-norm
    conditions as ``gradient_floor``.
    """
    cfg = OptimizerConfig() if config is None else config
    fg = _as_fg(problem)
    x = np.array(x0, dtype=float).reshape(-1)
    f, g = fg(x)
    f = float(f)
    g = np.asarray(g, dtype=float).reshape(-1)
    evals = 1
    xi = -g
    alpha = cfg.alpha0
    beta = cfg.beta0
    best_x, best_f = x.copy(), f
    gnorm = float(np.linalg.norm(g))
    history = [dict(iteration=0, objective=f, gradient_norm=gnorm, alpha=0.0, beta=0.0, evaluations=1)]
    reason = None
    prev_slope = None
    it = 0
    while reason is None:
        if f <= cfg.eps_objective:
            reason = "objective_floor"
            break
        if gnorm <= cfg.eps_gradient:
            reason = "gradient_floor"
            break
        if it >= cfg.max_iters:
            reason = "max_iters"
            break
        slope = float(g @ xi)
        if not slope < 0:
            xi = -g
            slope = -gnorm**2
        if prev_slope is not None and slope != 0:
            a_init = alpha * prev_slope / slope
        else:
            a_init = cfg.alpha0
        if not (np.isfinite(a_init) and cfg.alpha_bounds[0] < a_init <= cfg.alpha_bounds[1]):
            a_init = cfg.alpha0
        ls = wolfe_line_search(fg, x, f, g, xi, a_init, cfg.c1, cfg.c2, cfg.max_linesearch, cfg.expansion)
        evals += ls.evaluations
        if not ls.success:
            xi = -g
            slope = -gnorm**2
            ls = wolfe_line_search(fg, x, f, g, xi, cfg.alpha0, cfg.c1, cfg.c2, cfg.max_linesearch, cfg.expansion)
            evals += ls.evaluations
            if not ls.success:
                reason = "linesearch_fail"
                break
        if check_wolfe:
            ok_dec, ok_curv = strong_wolfe_ok(f, slope, ls.f, float(ls.g @ xi), ls.alpha, cfg.c1, cfg.c2)
            if not (ok_dec and ok_curv):
                raise WolfeViolation(f"iteration {it}: sufficient decrease {ok_dec}, curvature {ok_curv}")
        it += 1
        x_new = x + ls.alpha * xi
        f_new, g_new = ls.f, np.asarray(ls.g, dtype=float).reshape(-1)
        gnorm_new = float(np.linalg.norm(g_new))
        y = g_new - g
        denom = float(xi @ y)
        if abs(denom) < 1e-300:
            beta = cfg.beta0
        else:
            beta = float(g_new @ y) / denom
            if not (cfg.beta_bounds[0] <= beta <= cfg.beta_bounds[1]):
                beta = cfg.beta0
        gg = float(g @ g)
        beta_bar = float(g_new @ g_new) / gg if gg > 0 else 0.0
        if abs(beta) > beta_bar:
            beta = np.sign(beta) * beta_bar
        alpha = ls.alpha
        prev_slope = slope
        xi = -g_new + beta * xi
        df = f_new - f
        rel = df / abs(f) if f != 0 else 0.0
        dgn = gnorm_new - gnorm
        rel_g = dgn / gnorm if gnorm > 0 else 0.0
        x, f, g, gnorm = x_new, float(f_new), g_new, gnorm_new
        if f < best_f:
            best_x, best_f = x.copy(), f
        history.append(dict(iteration=it, objective=f, gradient_norm=gnorm, alpha=alpha, beta=beta,
                            evaluations=ls.evaluations))
        if it >= cfg.min_iters:
            if abs(df) <= cfg.eps_delta_objective:
                reason = "objective_floor"
            elif rel > cfg.eps_rel_objective:
                reason = "relative_increase"
            elif abs(dgn) <= cfg.eps_delta_gradient or rel_g > cfg.eps_rel_gradient:
                reason = "gradient_floor"
    report = StoppingReport(reason, it, best_f, f, gnorm, evals)
    return OptimizeResult(best_x, best_f, report, history)
