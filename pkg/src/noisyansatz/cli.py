"""Command-line entry point: evolve, optimize, sweep, fisher, lie-dim, fperror, fit."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import plotting
from .ansatz import build_generators, init_parameters
from .channels import LayeredChannel, NoiseModel, evolve
from .config import ConfigError, RunConfig, load_config, with_seed
from .diff import ControlProblem, fisher_unitary, lie_closure, numerical_rank
from .fit import fit_critical_depth
from .fperror import chain_experiment
from .linalg import NotHermitianError, NotPSDError, RngStream, haar_pure_state, haar_unitary
from .objectives import StatePreparation, UnitaryCompilation, state_metrics
from .optimize import minimize
from .records import RecordVersionError, RecordWriter, load, read_stats_csv, write_records_csv, write_stats_csv
from .sweep import SweepSpec, aggregate, run_sweep, stats_by_gamma

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Out:
    """Text sink: the --output file if given, stdout otherwise."""

    def __init__(self, path: str | None):
        self.path = Path(path) if path else None

    def write_text(self, text: str) -> None:
        if self.path is None:
            sys.stdout.write(text)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(text)

    def figure(self, suffix: str) -> Path | None:
        if self.path is None:
            return None
        return self.path.with_name(f"{self.path.stem}_{suffix}.png")


def _rows_text(rows: list, fmt: str) -> str:
    if not rows:
        return ""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    return "".join(json.dumps(r) + "\n" for r in rows)


def _task(cfg: RunConfig, d: int, gen):
    if cfg.objective.kind == "unitary":
        return UnitaryCompilation(haar_unitary(d, gen))
    return StatePreparation(haar_pure_state(d, gen), haar_pure_state(d, gen))


def cmd_evolve(cfg: RunConfig, args) -> int:
    model = cfg.build_model()
    gen = RngStream(cfg.model.seed, (1,)).generator()
    if args.state:
        sigma = np.load(args.state)
    else:
        sigma = haar_pure_state(model.d, gen)
    traj = init_parameters(model, cfg.model.mode, RngStream(cfg.model.seed, (2,)))
    channel = LayeredChannel(model, cfg.noise_model(), traj)
    rho = evolve(channel, sigma)
    target = haar_pure_state(model.d, gen)
    rec = dict(N=model.N, M=model.M, noise=cfg.noise.kind, gamma=cfg.noise.gamma,
               rho_real=np.real(rho).tolist(), rho_imag=np.imag(rho).tolist(),
               metrics=state_metrics(rho, target).as_dict())
    _Out(args.output).write_text(json.dumps(rec) + "\n")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> int:
    obj_kind = args.objective or cfg.objective.kind
    cfg = replace(cfg, objective=replace(cfg.objective, kind=obj_kind))
    mode = args.mode or cfg.model.mode
    noise = NoiseModel(args.noise or cfg.noise.kind, cfg.noise.gamma if args.gamma is None else args.gamma)
    if noise.gamma == 0:
        noise = NoiseModel()
    model = cfg.build_model()
    task = _task(cfg, model.d, RngStream(cfg.model.seed, (1,)).generator())
    problem = ControlProblem(model, noise, mode, task)
    x0 = init_parameters(model, mode, RngStream(cfg.model.seed, (2,)))
    res = minimize(problem, x0.raw.ravel(), cfg.optimizer)
    rows = [{k: h[k] for k in ("iteration", "objective", "gradient_norm", "alpha", "beta")} for h in res.history]
    out = _Out(args.output)
    out.write_text(_rows_text(rows, args.format))
    fig = out.figure("history")
    if fig:
        plotting.plot_history(res.history, fig)
    print(f"stop={res.report.reason} best={res.fun:.6e} iterations={res.report.iterations}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    spec = SweepSpec.from_config(cfg)
    out = _Out(args.output)
    if out.path is not None and args.format == "records":
        with RecordWriter(out.path) as sink:
            records = run_sweep(spec, sink, workers=args.workers)
    else:
        records = run_sweep(spec, workers=args.workers)
        if out.path is not None:
            write_records_csv(records, out.path)
        else:
            sys.stdout.write(_rows_text([r.to_dict() for r in records], "records"))
    if out.path is not None:
        stats = aggregate(records)
        write_stats_csv(stats, out.path.with_name(out.path.stem + "_stats.csv"))
        for N in sorted(set(spec.N)):
            for kind in sorted(set(spec.noise)):
                for obj in sorted(set(spec.objective)):
                    for mode in sorted(set(spec.mode)):
                        sg = stats_by_gamma(stats, N, kind, obj, mode)
                        noiseless = stats_by_gamma(stats, N, "none", obj, mode)
                        sg.update(noiseless)
                        if sg:
                            plotting.plot_depth_curves(sg, out.figure(f"N{N}_{kind}_{obj}_{mode}"))
    failed = sum(r.stop_reason == "task_error" for r in records)
    return EXIT_NUMERICAL if failed == len(records) and records else EXIT_OK


def cmd_fisher(cfg: RunConfig, args) -> int:
    rows, spectra = [], {}
    mode = cfg.model.mode
    for N in cfg.sweep.n:
        for M in cfg.sweep.m:
            model = cfg.build_model(N=N, M=M)
            gen = RngStream(cfg.model.seed, (3, N, M)).generator()
            channels = 2 if mode == "constrained" else 2 * N
            raw = gen.uniform(-model.theta_bar, model.theta_bar, size=M * channels)
            channel = LayeredChannel.from_raw(model, NoiseModel(), raw, mode)
            F = fisher_unitary(channel)
            est = numerical_rank(F.entries)
            spectra[M] = est.spectrum
            rows.append(dict(N=N, M=M, P=raw.size, rank=est.rank, rule=est.threshold_rule,
                             spectrum=json.dumps(est.spectrum.tolist()) if args.format == "csv" else est.spectrum.tolist()))
    out = _Out(args.output)
    out.write_text(_rows_text(rows, args.format))
    fig = out.figure("spectrum")
    if fig:
        plotting.plot_spectrum(spectra, fig)
    return EXIT_OK


def cmd_lie_dim(cfg: RunConfig, args) -> int:
    model = cfg.build_model()
    gens = build_generators(model)
    closure = lie_closure(gens)
    row = dict(N=model.N, generators=gens.labels, dimension=closure.dimension, closed=closure.closed)
    _Out(args.output).write_text(_rows_text([row], args.format) if args.format == "csv" else json.dumps(row) + "\n")
    return EXIT_OK


def cmd_fperror(cfg: RunConfig, args) -> int:
    ks = args.k or [4, 16, 64, 256]
    eps = args.epsilon or [1e-10, 1e-8, 1e-6]
    rows = chain_experiment(ks, eps, seed=cfg.model.seed)
    out = _Out(args.output)
    out.write_text(_rows_text([asdict(r) for r in rows], "csv"))
    fig = out.figure("chain")
    if fig:
        plotting.plot_fp_table(rows, fig)
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    src = Path(args.input)
    if src.suffix == ".csv":
        stats = read_stats_csv(src)
    else:
        loaded = load(src)
        if loaded.skipped:
            print(f"skipped {loaded.skipped} corrupted records", file=sys.stderr)
        stats = aggregate(loaded.records)
    out = _Out(args.output)
    rows = []
    keys = sorted({(k[0], k[3], k[4], k[5]) for k in stats if k[3] != "none"})
    for N, kind, obj, mode in keys:
        sg = stats_by_gamma(stats, N, kind, obj, mode)
        try:
            fit = fit_critical_depth(sg)
        except ValueError as exc:
            print(f"N={N} {kind} {obj} {mode}: {exc}", file=sys.stderr)
            continue
        for g in fit.per_gamma:
            rows.append(dict(N=N, noise=kind, objective=obj, mode=mode, gamma=g.gamma, breakpoint=g.breakpoint,
                             breakpoint_err=g.breakpoint_err, rate=g.rate, exponent=g.exponent, flagged=g.flagged,
                             slope=fit.slope, slope_err=fit.slope_err, intercept=fit.intercept,
                             intercept_err=fit.intercept_err, r2=fit.r2))
        if out.path is not None:
            tag = f"N{N}_{kind}_{obj}_{mode}"
            plotting.plot_depth_curves(sg, out.figure(f"{tag}_depth"), fit=fit)
            plotting.plot_critical_depth(fit, out.figure(f"{tag}_critical"))
    out.write_text(_rows_text(rows, args.format))
    return EXIT_OK


COMMANDS = {
    "evolve": cmd_evolve,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "fisher": cmd_fisher,
    "lie-dim": cmd_lie_dim,
    "fperror": cmd_fperror,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config (sections model, noise, objective, optimizer, sweep)")
    common.add_argument("--seed", type=int, help="overrides model.seed and sweep.seed")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--output", help="output file; figures are written next to it")
    common.add_argument("--format", choices=("records", "csv"), default="records")

    parser = argparse.ArgumentParser(prog="noisyansatz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("evolve", parents=[common], help="evolve an initial state through the channel")
    p.add_argument("--state", help=".npy density matrix; a Haar-random pure state otherwise")
    p = sub.add_parser("optimize", parents=[common], help="optimize one task and print the iterate history")
    p.add_argument("--objective", choices=("state", "unitary"))
    p.add_argument("--noise")
    p.add_argument("--gamma", type=float)
    p.add_argument("--mode", choices=("unconstrained", "constrained"))
    sub.add_parser("sweep", parents=[common], help="run the configured sweep grid")
    sub.add_parser("fisher", parents=[common], help="unitary Fisher spectrum and rank per depth")
    sub.add_parser("lie-dim", parents=[common], help="dimension of the generated Lie algebra")
    p = sub.add_parser("fperror", parents=[common], help="injected floating-point error table")
    p.add_argument("--k", type=int, nargs="*")
    p.add_argument("--epsilon", type=float, nargs="*")
    p = sub.add_parser("fit", parents=[common], help="critical-depth fit from records or stats CSV")
    p.add_argument("input")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = with_seed(load_config(args.config), args.seed)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, RecordVersionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, NotHermitianError, NotPSDError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
