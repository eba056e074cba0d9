"""Command-line interface: ``clrg {simulate,solve,trace,bench,verify}``.

Exit status is 0 on success, 1 on usage errors (bad flags, unreadable
inputs) and 2 when the inputs violate a modelling assumption or a numerical
check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench, dynamics, verify
from .errors import ClrgError
from .game import (
    GameConfig,
    index_split,
    nash_ensemble,
    nash_ensemble_multi,
    nash_strategies,
    variational_stability_check,
)
from .population import EnvironmentMoments, least_squares, pooled_empirical_erm, population_moments
from .sem import SETTINGS, EnvSample, SemConfig, preset, sample_all

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _setting(text: str) -> str:
    up = text.upper()
    if up not in SETTINGS:
        raise argparse.ArgumentTypeError(f"setting must be one of {', '.join(SETTINGS)}")
    return up


# ---------------------------------------------------------------- file formats

def samples_to_csv(samples: Sequence[EnvSample]) -> str:
    """Rows ``env,y,x1..xd`` with 1-based environment labels and 17 significant digits."""
    d = samples[0].x.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["env", "y"] + [f"x{j + 1}" for j in range(d)])
    for s in samples:
        for yi, xi in zip(s.y, s.x):
            w.writerow([s.env_index + 1, f"{yi:.17g}"] + [f"{v:.17g}" for v in xi])
    return buf.getvalue()


def samples_from_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ClrgError("sample file is empty")
    header = rows[0]
    if len(header) < 3 or header[0] != "env" or header[1] != "y":
        raise ClrgError("sample file must start with the header env,y,x1,...")
    groups: dict = {}
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ClrgError(f"line {k} has {len(row)} fields, expected {len(header)}")
        try:
            env = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ClrgError(f"line {k}: {exc}") from exc
        groups.setdefault(env, []).append(vals)
    out = []
    for e, env in enumerate(sorted(groups)):
        arr = np.array(groups[env])
        out.append(EnvSample(env_index=e, x=arr[:, 1:], y=arr[:, 0]))
    return out


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc


def _load_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ClrgError(f"{path} is not valid JSON: {exc}") from exc


def _moments_from_json(data) -> list:
    envs = data.get("envs") if isinstance(data, dict) else data
    if not isinstance(envs, list):
        raise ClrgError('moments JSON must be {"envs": [{"sigma": ..., "rho": ...}, ...]}')
    out = []
    for e in envs:
        sigma = np.array(e["sigma"], dtype=float)
        out.append(EnvironmentMoments(sigma=sigma, rho=e["rho"], mu=e.get("mu", np.zeros(sigma.shape[0])),
                                      source="analytic"))
    return out


# ---------------------------------------------------------------- input sources

def _add_source_args(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("input (choose one)")
    g.add_argument("--data", help="sample CSV as written by `simulate`")
    g.add_argument("--moments", help='JSON {"envs": [{"sigma": [[...]], "rho": [...]}, ...]}')
    g.add_argument("--config", help="SEM configuration JSON (population moments are used)")
    g.add_argument("--preset", type=_setting, help="benchmark setting (population moments unless --n is given)")
    g.add_argument("--p", type=int, default=5)
    g.add_argument("--q", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, help="with --preset/--config: draw this many samples per environment")


class Problem:
    def __init__(self, moments, samples=None, p=None):
        self.moments = moments
        self.samples = samples
        self.p = p


def _load_problem(args) -> Problem:
    chosen = [k for k in ("data", "moments", "config", "preset") if getattr(args, k)]
    if len(chosen) != 1:
        raise UsageError("give exactly one of --data, --moments, --config, --preset")
    src = chosen[0]
    if src == "data":
        samples = samples_from_csv(_read_text(args.data))
        return Problem([EnvironmentMoments.from_sample(s) for s in samples], samples)
    if src == "moments":
        return Problem(_moments_from_json(_load_json(args.moments)))
    cfg = SemConfig.from_dict(_load_json(args.config)) if src == "config" else preset(args.preset, args.p, args.q, args.seed)
    if args.n is not None:
        samples = sample_all(cfg, args.n, args.seed)
        return Problem([EnvironmentMoments.from_sample(s) for s in samples], samples, cfg.p)
    return Problem([population_moments(cfg, e) for e in range(cfg.n_envs)], None, cfg.p)


def _vec(v) -> list:
    return [float(x) for x in np.asarray(v).ravel()]


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    if args.config:
        cfg = SemConfig.from_dict(_load_json(args.config))
    else:
        if not args.preset:
            raise UsageError("simulate needs --preset or --config")
        cfg = preset(args.preset, args.p, args.q, args.seed, independent_envs=args.independent_envs)
    if args.n < 1:
        raise UsageError("--n must be positive")
    samples = sample_all(cfg, args.n, args.seed)
    _write_text(args.out, samples_to_csv(samples))
    if args.save_config:
        _write_text(args.save_config, json.dumps(cfg.to_dict(), indent=2) + "\n")
    return EXIT_OK


def solve_report(problem: Problem, w_sup: float, tol: float = 1e-9, with_moments: bool = False) -> dict:
    moms = problem.moments
    stars = [least_squares(m).w_star for m in moms]
    cfg = GameConfig(w_sup=w_sup, tolerance=tol)
    out: dict = {}
    if len(stars) == 2:
        sol = nash_strategies(stars[0], stars[1], cfg)
        split = index_split(stars[0], stars[1], tol)
        out.update({
            "w1_star": _vec(stars[0]),
            "w2_star": _vec(stars[1]),
            "ensemble": _vec(nash_ensemble(stars[0], stars[1], tol)),
            "strategies": [_vec(s) for s in sol.strategies],
            "boundary_flags": sol.boundary_flags.tolist(),
            "u_set": [i + 1 for i in split.u_set],
            "v_set": [i + 1 for i in split.v_set],
            "stability": str(variational_stability_check(moms[0].sigma, moms[1].sigma)),
            "iteration_bound": (dynamics.iteration_bound(stars[0], stars[1], w_sup, split)
                                if split.v_set else None),
        })
    else:
        out.update({
            "w_stars": [_vec(w) for w in stars],
            "ensemble": _vec(nash_ensemble_multi(stars, cfg)),
            "strategies": None,
        })
    if problem.samples is not None:
        out["erm"] = _vec(pooled_empirical_erm(problem.samples))
    if with_moments:
        out["moments"] = [{"sigma": m.sigma.tolist(), "rho": _vec(m.rho), "mu": _vec(m.mu)} for m in moms]
    return out


def cmd_solve(args) -> int:
    report = solve_report(_load_problem(args), args.w_sup, args.tol, args.emit_moments)
    _write_text(args.out, json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def trace_csv(trace: dynamics.DynamicsTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "env", "component", "value"])
    for r in trace.rounds:
        for e, s in enumerate(r.strategies):
            for i, v in enumerate(s):
                w.writerow([r.index, e + 1, i + 1, f"{v:.17g}"])
        for i, v in enumerate(r.ensemble):
            w.writerow([r.index, "ensemble", i + 1, f"{v:.17g}"])
    return buf.getvalue()


def trace_svg(trace: dynamics.DynamicsTrace, components: Sequence[int], title: str) -> str:
    from .plotting import line_chart

    xs = [r.index for r in trace.rounds]
    series = {}
    for i in components:
        series[f"ensemble[{i}]"] = (xs, [r.ensemble[i - 1] for r in trace.rounds])
        for e in range(len(trace.rounds[0].strategies)):
            series[f"env{e + 1}[{i}]"] = (xs, [r.strategies[e][i - 1] for r in trace.rounds])
    dashed = [k for k in series if k.startswith("env")]
    return line_chart(series, title=title, xlabel="round", ylabel="coefficient", dashed=dashed)


def cmd_trace(args) -> int:
    problem = _load_problem(args)
    params = dynamics.DynamicsParams(
        w_sup=args.w_sup, tol=args.tol, max_rounds=args.max_rounds, beta=args.beta,
        batch_size=args.batch_size, epochs=args.epochs, penalty=args.penalty, lam=args.lam,
        seed=args.seed, trace_every=args.every,
    )
    if args.dynamic == "exact":
        tr = dynamics.exact_brd_multi(problem.moments, params)
    elif args.dynamic == "sgd":
        if problem.samples is None:
            raise UsageError("the sgd dynamic needs samples: use --data or --n")
        tr = dynamics.sgd_brd(problem.samples, params)
    else:
        if len(problem.moments) != 2:
            raise UsageError(f"the {args.dynamic} dynamic is defined for two environments")
        stars = [least_squares(m).w_star for m in problem.moments]
        fn = dynamics.clamp_brd if args.dynamic == "clamp" else dynamics.signed_grad_brd
        tr = fn(stars[0], stars[1], params)
    _write_text(args.out, trace_csv(tr))
    if args.svg:
        d = problem.moments[0].d
        comps = args.components or (list(range(problem.p + 1, d + 1)) if problem.p else list(range(1, d + 1)))
        bad = [c for c in comps if not 1 <= c <= d]
        if bad:
            raise UsageError(f"components {bad} out of range 1..{d}")
        _write_text(args.svg, trace_svg(tr, comps, f"{args.dynamic} dynamic"))
    print(f"stop_reason={tr.stop_reason} rounds={tr.n_rounds} ensemble={_vec(tr.ensemble)}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    params = dynamics.DynamicsParams(w_sup=args.w_sup, beta=args.beta, batch_size=args.batch_size,
                                     epochs=args.epochs)
    if args.table1:
        reps = [bench.table1_experiment(args.seed + k, n=args.n, params=params) for k in range(args.trials)]
        _write_text(args.out, bench.table1_csv(reps))
        return EXIT_OK
    spec = bench.ExperimentSpec(
        setting=args.setting, p=args.p, q=args.q, sample_sizes=tuple(args.sizes), trials=args.trials,
        methods=tuple(args.methods), seed=args.seed, dynamics=params,
        fixed_instance=args.fixed_instance, independent_envs=args.independent_envs,
    )
    try:
        workers = bench.thread_count()
    except ClrgError as exc:
        raise UsageError(str(exc)) from exc
    report = bench.run_experiment(spec, workers=workers)
    _write_text(args.out, report.to_csv())
    if args.svg:
        _write_text(args.svg, report.to_svg(log_y=args.log_y, literature=args.literature))
    for c in report.cells.values():
        for trial, msg in c.failures:
            print(f"warning: {c.method} n={c.n} trial {trial} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    return EXIT_OK if verify.run_all(seed=args.seed) else EXIT_NUMERIC


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="clrg", description="Constrained linear regression games.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("simulate", help="draw samples from the SEM")
    sp.add_argument("--preset", type=_setting)
    sp.add_argument("--config", help="SEM configuration JSON instead of a preset")
    sp.add_argument("--p", type=int, default=5)
    sp.add_argument("--q", type=int, default=5)
    sp.add_argument("--n", type=int, default=1000, help="samples per environment")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--independent-envs", action="store_true",
                    help="redraw alpha/Theta/eta per environment instead of sharing them")
    sp.add_argument("--out", help="output CSV (default: stdout)")
    sp.add_argument("--save-config", help="also write the SEM configuration as JSON")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("solve", help="equilibrium of the game from moments or samples")
    _add_source_args(sp)
    sp.add_argument("--w-sup", type=float, default=2.0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--emit-moments", action="store_true", help="include the moments used in the JSON")
    sp.add_argument("--out", help="output JSON (default: stdout)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("trace", help="per-round trajectories of a learning dynamic")
    _add_source_args(sp)
    sp.add_argument("--dynamic", choices=("exact", "clamp", "signed", "sgd"), default="exact")
    sp.add_argument("--w-sup", type=float, default=2.0)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-rounds", type=int, default=10_000)
    sp.add_argument("--beta", type=float, default=0.005)
    sp.add_argument("--batch-size", type=int, default=128)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--penalty", choices=dynamics.PENALTIES, default="none")
    sp.add_argument("--lam", type=float, default=0.1)
    sp.add_argument("--every", type=int, default=1, help="record every k-th round")
    sp.add_argument("--components", type=_int_list, help="1-based components to plot (default: spurious block)")
    sp.add_argument("--out", help="output CSV (default: stdout)")
    sp.add_argument("--svg", help="also write an SVG line chart")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("bench", help="estimation-error benchmark")
    sp.add_argument("--setting", type=_setting, default="F-HOM")
    sp.add_argument("--p", type=int, default=5)
    sp.add_argument("--q", type=int, default=5)
    sp.add_argument("--sizes", type=_int_list, default=[20, 100, 250, 500, 750, 1000])
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--methods", type=lambda s: [m.strip().upper() for m in s.split(",") if m.strip()],
                    default=list(bench.DEFAULT_METHODS), help=f"subset of {','.join(bench.METHODS)}")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--w-sup", type=float, default=2.0)
    sp.add_argument("--beta", type=float, default=0.005)
    sp.add_argument("--batch-size", type=int, default=128)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--fixed-instance", action="store_true")
    sp.add_argument("--independent-envs", action="store_true")
    sp.add_argument("--table1", action="store_true", help="run the 2-D comparison, one row per seed and method")
    sp.add_argument("--n", type=int, default=1000, help="samples per environment for --table1")
    sp.add_argument("--out", help="report CSV (default: stdout)")
    sp.add_argument("--svg", help="error-vs-n chart")
    sp.add_argument("--log-y", action="store_true")
    sp.add_argument("--literature", action="store_true", help="overlay published reference values on the chart")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("verify", help="run the seeded property suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"clrg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClrgError as exc:
        print(f"clrg {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KeyError, TypeError) as exc:
        print(f"clrg {args.command}: malformed input: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
