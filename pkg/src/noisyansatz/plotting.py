"""Matplotlib figures written next to the delimited report output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_depth_curves(stats_by_gamma: dict, path, ylabel: str = "mean best infidelity", fit=None) -> Path:
    """Objective against depth, one line per noise scale, with the fitted breakpoints marked."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    cmap = plt.get_cmap("viridis")
    gammas = sorted(stats_by_gamma)
    for i, g in enumerate(gammas):
        M, mean, std = stats_by_gamma[g][:3]
        c = cmap(i / max(len(gammas) - 1, 1))
        # symmetric bars on the log axis: lower bar mirrors the upper one in log space
        upper = mean + std
        lower = mean**2 / upper
        ax.errorbar(M, mean, yerr=[mean - lower, upper - mean], color=c, marker="o", ms=3,
                    label=f"gamma={g:g}" if g else "noiseless")
    if fit is not None:
        for gf in fit.per_gamma:
            if gf.breakpoint is not None:
                ax.axvline(gf.breakpoint, color="k", lw=0.6, ls=":")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("depth M")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_critical_depth(fit, path) -> Path:
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    ok = [g for g in fit.per_gamma if not g.flagged]
    if ok:
        x = np.log(1 / np.array([g.gamma for g in ok]))
        y = np.array([g.breakpoint for g in ok])
        ax.errorbar(x, y, yerr=[g.breakpoint_err for g in ok], fmt="o", color="k")
        if np.isfinite(fit.slope):
            xs = np.linspace(x.min(), x.max(), 50)
            ax.plot(xs, fit.intercept + fit.slope * xs, "--", color="C1", label=f"R^2={fit.r2:.3f}")
            ax.legend(fontsize=7)
    ax.set_xlabel("log(1/gamma)")
    ax.set_ylabel("critical depth")
    return _save(fig, path)


def plot_spectrum(spectra: dict, path) -> Path:
    """Normalized eigenvalue spectra keyed by depth."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    cmap = plt.get_cmap("plasma")
    keys = sorted(spectra)
    for i, M in enumerate(keys):
        w = np.asarray(spectra[M])
        w = np.abs(w) / np.abs(w).max() if w.size and np.abs(w).max() > 0 else w
        ax.semilogy(np.arange(1, w.size + 1), np.maximum(w, 1e-18), color=cmap(i / max(len(keys) - 1, 1)),
                    label=f"M={M}")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue / max")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def plot_history(history: list, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    it = [h["iteration"] for h in history]
    ax.semilogy(it, [max(h["objective"], 1e-18) for h in history])
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    return _save(fig, path)


def plot_fp_table(rows: list, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for i, eps in enumerate(sorted({r.epsilon for r in rows})):
        sel = [r for r in rows if r.epsilon == eps]
        k = [r.k for r in sel]
        ax.loglog(k, [r.measured_deterministic for r in sel], "o-", color=f"C{i}", label=f"eps={eps:g}")
        ax.loglog(k, [r.analytic_bound for r in sel], "--", color=f"C{i}")
    ax.set_xlabel("products k")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=7)
    return _save(fig, path)


__all__ = ["plot_critical_depth", "plot_depth_curves", "plot_fp_table", "plot_history", "plot_spectrum"]
