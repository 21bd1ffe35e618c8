"""Haar-sampled task batches swept over depth, noise scale and register size."""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from .ansatz import NmrModel, init_parameters
from .channels import NoiseModel, evolve
from .config import RunConfig, model_from_section
from .diff import ControlProblem
from .linalg import RngStream, haar_pure_state, haar_unitary
from .objectives import (
    StatePreparation,
    UnitaryCompilation,
    decompose_state,
    leading_order_predictions,
    state_metrics,
)
from .optimize import OptimizerConfig, WolfeViolation, minimize

TASK_ERROR = "task_error"


def stable_path(*coords) -> tuple:
    """Four 32-bit words hashed from the coordinates; independent of process and ordering."""
    digest = hashlib.sha256(repr(tuple(coords)).encode()).digest()
    return tuple(int.from_bytes(digest[4 * i: 4 * i + 4], "little") for i in range(4))


def task_stream(base_seed: int, N: int, objective: str, sample: int) -> RngStream:
    return RngStream(base_seed, stable_path("task", N, objective, sample))


def init_stream(base_seed: int, N: int, M: int, objective: str, mode: str, sample: int) -> RngStream:
    return RngStream(base_seed, stable_path("init", N, M, objective, mode, sample))


@dataclass(frozen=True)
class Cell:
    N: int
    M: int
    gamma: float
    noise: str
    objective: str
    mode: str
    sample: int


@dataclass
class SweepSpec:
    N: list
    M: list
    gamma: list
    noise: list
    objective: list
    mode: list
    samples: int = 5
    base_seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    config: RunConfig = field(default_factory=RunConfig)
    check_wolfe: bool = False  # raise WolfeViolation on any accepted step that breaks the conditions

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "SweepSpec":
        sw = cfg.sweep
        return cls(list(sw.n), list(sw.m), list(sw.gamma), list(sw.noise), list(sw.objective), list(sw.mode),
                   sw.samples, sw.seed, cfg.optimizer, cfg)

    def cells(self) -> list:
        """Every (grid point, sample) in canonical order."""
        out = [Cell(int(n), int(m), float(g), k, o, mo, s)
               for n, m, g, k, o, mo in product(sorted(self.N), sorted(self.M), sorted(self.gamma),
                                                 sorted(self.noise), sorted(self.objective), sorted(self.mode))
               for s in range(self.samples)]
        # gamma = 0 makes the noise kind irrelevant; keep one copy
        seen, unique = set(), []
        for c in out:
            key = (c.N, c.M, c.gamma, "none" if c.gamma == 0 else c.noise, c.objective, c.mode, c.sample)
            if key not in seen:
                seen.add(key)
                unique.append(c)
        return unique


@dataclass
class SampleRecord:
    N: int
    M: int
    gamma: float
    noise: str
    objective: str
    mode: str
    sample: int
    seed: int
    best: float
    tested: float
    final: float
    iterations: int
    evaluations: int
    stop_reason: str
    K: int
    metrics: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    error: str = ""

    def coords(self) -> tuple:
        return (self.N, self.M, self.gamma, self.noise, self.objective, self.mode)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SampleRecord":
        return cls(**data)


def draw_task(cell: Cell, base_seed: int, d: int):
    """Initial state and target for the cell's sample; shared by every depth and noise scale."""
    gen = task_stream(base_seed, cell.N, cell.objective, cell.sample).generator()
    if cell.objective == "unitary":
        return UnitaryCompilation(haar_unitary(d, gen))
    psi = haar_pure_state(d, gen)
    U = haar_unitary(d, gen)
    sigma = haar_pure_state(d, gen)
    return StatePreparation(sigma, U @ psi @ U.conj().T)


def _noise(cell: Cell) -> NoiseModel:
    if cell.gamma == 0 or cell.noise == "none":
        return NoiseModel()
    return NoiseModel(cell.noise, cell.gamma)


def build_cell_model(cell: Cell, config: RunConfig) -> NmrModel:
    return model_from_section(config.model, cell.N, cell.M, cell.objective)


def run_cell(cell: Cell, spec: SweepSpec) -> SampleRecord:
    base = dict(N=cell.N, M=cell.M, gamma=cell.gamma, noise="none" if cell.gamma == 0 else cell.noise,
                objective=cell.objective, mode=cell.mode, sample=cell.sample, seed=spec.base_seed,
                K=cell.N * cell.M)
    try:
        model = build_cell_model(cell, spec.config)
        task = draw_task(cell, spec.base_seed, model.d)
        noise = _noise(cell)
        problem = ControlProblem(model, noise, cell.mode, task)
        x0 = init_parameters(model, cell.mode,
                             init_stream(spec.base_seed, cell.N, cell.M, cell.objective, cell.mode, cell.sample))
        res = minimize(problem, x0.raw.ravel(), spec.optimizer, check_wolfe=spec.check_wolfe)
        best = min(h["objective"] for h in res.history)
        clean = ControlProblem(model, NoiseModel(), cell.mode, task, problem.gens)
        tested = clean.value(res.x) if noise.active else res.fun
        metrics, predicted = {}, {}
        if cell.objective == "state":
            channel = problem.channel(res.x)
            rho = evolve(channel, task.sigma)
            metrics = state_metrics(rho, task.target).as_dict()
            if noise.active:
                dec = decompose_state(rho, task.target, channel, task.sigma)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    lo = leading_order_predictions(dec, channel.K, noise.gamma, model.d)
                predicted = dict(infidelity=lo.infidelity, impurity=lo.impurity, gamma_K=dec.gamma_K,
                                 alpha=dec.alpha, beta=dec.beta)
        return SampleRecord(**base, best=float(best), tested=float(tested), final=float(res.history[-1]["objective"]),
                            iterations=res.report.iterations, evaluations=res.report.evaluations,
                            stop_reason=res.report.reason, metrics=metrics, predicted=predicted)
    except WolfeViolation:
        raise
    except Exception as exc:  # a failed task is recorded, the sweep continues
        nan = float("nan")
        return SampleRecord(**base, best=nan, tested=nan, final=nan, iterations=0, evaluations=0,
                            stop_reason=TASK_ERROR, error=f"{type(exc).__name__}: {exc}")


def _run_packed(args):
    cell, spec = args
    return run_cell(cell, spec)


def run_sweep(spec: SweepSpec, sink=None, workers: int = 1) -> list:
    """Run every cell; records reach ``sink`` (and the returned list) in canonical order."""
    cells = spec.cells()
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stream = pool.map(_run_packed, [(c, spec) for c in cells])
            for rec in stream:
                records.append(rec)
                if sink is not None:
                    sink(rec)
    else:
        for c in cells:
            rec = run_cell(c, spec)
            records.append(rec)
            if sink is not None:
                sink(rec)
    return records


@dataclass
class PointStats:
    mean: float
    std: float
    count: int


def aggregate(records, value: str = "best") -> dict:
    """Mean, population standard deviation and count per grid point; failed tasks are skipped."""
    groups: dict = {}
    for r in records:
        v = getattr(r, value) if hasattr(r, value) else r.metrics.get(value, float("nan"))
        if r.stop_reason == TASK_ERROR or not np.isfinite(v):
            continue
        groups.setdefault(r.coords(), []).append(v)
    return {k: PointStats(float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(groups.items())}


def stats_by_gamma(stats: dict, N: int, noise: str, objective: str, mode: str) -> dict:
    """Reshape aggregated statistics into gamma -> (depths, means, stds, counts) for the fit."""
    out: dict = {}
    for (n, M, g, k, o, mo), s in stats.items():
        if (n, k, o, mo) == (N, noise, objective, mode):
            out.setdefault(g, []).append((M, s.mean, s.std, s.count))
    return {g: tuple(np.array(col) for col in zip(*sorted(rows))) for g, rows in out.items()}


def noise_limited(record: SampleRecord, max_kgamma: float = 0.05, coherent_fraction: float = 0.05) -> bool:
    """True when the optimum sits on the noise floor in the weak-noise regime.

    The noiseless infidelity at the trained parameters must be a small fraction of the
    trained noisy one, otherwise residual coherent error dominates and leading-order
    noise predictions do not apply.
    """
    if record.stop_reason == TASK_ERROR or record.gamma <= 0 or not record.metrics:
        return False
    if record.K * record.gamma >= max_kgamma:
        return False
    trained = record.metrics.get("infidelity_state", record.best)
    return trained > 0 and record.tested <= coherent_fraction * trained


__all__ = [
    "Cell",
    "PointStats",
    "SampleRecord",
    "SweepSpec",
    "aggregate",
    "draw_task",
    "init_stream",
    "noise_limited",
    "run_cell",
    "run_sweep",
    "stable_path",
    "stats_by_gamma",
    "task_stream",
]
