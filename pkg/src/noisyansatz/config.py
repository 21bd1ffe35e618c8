"""YAML run configuration. Rates in the file are in Hz and converted to rad/s on load."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from itertools import combinations
from pathlib import Path

import numpy as np
import yaml

from .ansatz import (
    HZ_TO_RAD_S,
    MODES,
    TABLE_H_KHZ,
    TABLE_J_HZ,
    TABLE_THETA_BAR_MHZ,
    TAU_COMPILE,
    TAU_PREPARE,
    NmrModel,
)
from .channels import NOISE_KINDS, NoiseModel
from .optimize import OptimizerConfig

OBJECTIVE_KINDS = ("state", "unitary")
SECTIONS = ("model", "noise", "objective", "optimizer", "sweep")


class ConfigError(ValueError):
    pass


def default_tau(objective: str) -> float:
    return TAU_PREPARE if objective == "state" else TAU_COMPILE


@dataclass
class ModelSection:
    n: int = 2
    m: int = 16
    tau: float | None = None  # None picks the per-task default
    q: int = 2
    mode: str = "unconstrained"
    j: list | None = None  # Hz, upper triangle in lexicographic pair order
    h: list | None = None  # Hz
    theta_bar: float = TABLE_THETA_BAR_MHZ * 1e6  # Hz
    seed: int = 0


@dataclass
class NoiseSection:
    kind: str = "dephasing"
    gamma: float = 0.0
    gamma_sites: list | None = None  # accepted, not used: every site shares one gamma


@dataclass
class ObjectiveSection:
    kind: str = "state"


@dataclass
class SweepSection:
    n: list = field(default_factory=lambda: [2])
    m: list = field(default_factory=lambda: [4, 8, 16, 32])
    gamma: list = field(default_factory=lambda: [0.0])
    noise: list = field(default_factory=lambda: ["dephasing"])
    objective: list = field(default_factory=lambda: ["state"])
    mode: list = field(default_factory=lambda: ["unconstrained"])
    samples: int = 5
    seed: int = 0


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    objective: ObjectiveSection = field(default_factory=ObjectiveSection)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sweep: SweepSection = field(default_factory=SweepSection)

    def build_model(self, N: int | None = None, M: int | None = None, objective: str | None = None) -> NmrModel:
        return model_from_section(self.model, N, M, objective or self.objective.kind)

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise.kind, self.noise.gamma)


def table_couplings_hz(N: int) -> np.ndarray:
    J = np.zeros((N, N))
    for value, (i, j) in zip(TABLE_J_HZ, combinations(range(5), 2)):
        if j < N:
            J[i, j] = value
    return J


def model_from_section(sec: ModelSection, N: int | None = None, M: int | None = None,
                       objective: str = "state") -> NmrModel:
    N = sec.n if N is None else N
    M = sec.m if M is None else M
    if sec.j is None:
        if N > 5:
            raise ConfigError("tabulated couplings cover at most 5 spins; give model.j explicitly")
        J = table_couplings_hz(N)
    else:
        vals = list(sec.j)
        pairs = list(combinations(range(N), 2))
        if len(vals) != len(pairs):
            raise ConfigError(f"model.j needs {len(pairs)} entries for n={N}, got {len(vals)}")
        J = np.zeros((N, N))
        for v, (a, b) in zip(vals, pairs):
            J[a, b] = v
    if sec.h is None:
        if N > 5:
            raise ConfigError("tabulated fields cover at most 5 spins; give model.h explicitly")
        h = np.array(TABLE_H_KHZ[:N]) * 1e3
    else:
        h = np.asarray(sec.h, dtype=float)
        if h.shape != (N,):
            raise ConfigError(f"model.h needs {N} entries, got {h.size}")
    tau = default_tau(objective) if sec.tau is None else float(sec.tau)
    try:
        return NmrModel(N=N, M=M, tau=tau, Q=sec.q, J=J * HZ_TO_RAD_S, h=h * HZ_TO_RAD_S,
                        theta_bar=float(sec.theta_bar) * HZ_TO_RAD_S)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.model.mode not in MODES:
        raise ConfigError(f"model.mode must be one of {MODES}")
    if cfg.noise.kind not in NOISE_KINDS:
        raise ConfigError(f"noise.kind must be one of {NOISE_KINDS}")
    if cfg.objective.kind not in OBJECTIVE_KINDS:
        raise ConfigError(f"objective.kind must be one of {OBJECTIVE_KINDS}")
    if not 0 <= cfg.noise.gamma <= 1:
        raise ConfigError("noise.gamma must lie in [0, 1]")
    sw = cfg.sweep
    if sw.samples < 1:
        raise ConfigError("sweep.samples must be >= 1")
    for kind in sw.noise:
        if kind not in NOISE_KINDS:
            raise ConfigError(f"unknown sweep noise kind {kind!r}")
    for kind in sw.objective:
        if kind not in OBJECTIVE_KINDS:
            raise ConfigError(f"unknown sweep objective {kind!r}")
    for mode in sw.mode:
        if mode not in MODES:
            raise ConfigError(f"unknown sweep mode {mode!r}")
    if any(not 0 <= g <= 1 for g in sw.gamma):
        raise ConfigError("sweep gammas must lie in [0, 1]")
    return cfg


def parse_config(data: dict | None) -> RunConfig:
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    opt = data.get("optimizer") or {}
    if "alpha_bounds" in opt or "beta_bounds" in opt:
        opt = dict(opt)
        for key in ("alpha_bounds", "beta_bounds"):
            if key in opt:
                opt[key] = tuple(float(v) for v in opt[key])
    cfg = RunConfig(
        model=_section(ModelSection, data.get("model"), "model"),
        noise=_section(NoiseSection, data.get("noise"), "noise"),
        objective=_section(ObjectiveSection, data.get("objective"), "objective"),
        optimizer=_section(OptimizerConfig, opt, "optimizer"),
        sweep=_section(SweepSection, data.get("sweep"), "sweep"),
    )
    return validate(cfg)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return parse_config(data)


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return replace(cfg, model=replace(cfg.model, seed=seed), sweep=replace(cfg.sweep, seed=seed))


__all__ = [
    "ConfigError",
    "ModelSection",
    "NoiseSection",
    "ObjectiveSection",
    "RunConfig",
    "SweepSection",
    "default_tau",
    "load_config",
    "model_from_section",
    "parse_config",
    "with_seed",
]
