"""Benchmark harness: estimation error of game-based predictors versus ERM.

A run draws a fresh SEM instance per trial, fresh samples per sample size,
fits every requested method and records the squared distance of the fitted
model from the ideal ``(1_p, 0_q)``.  Work is split into independent
``(trial, n)`` cells with deterministic seeds, so results do not depend on
the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import DynamicsParams, exact_brd, sgd_brd
from .errors import ClrgError, DimensionMismatch
from .literature import ten_dim_series
from .plotting import line_chart
from .population import EnvironmentMoments, pooled_empirical_erm
from .sem import SETTINGS, preset, sample_all

METHODS = ("CLRG_SGD", "CLRG_EXACT", "ULRG", "RINF_LRG", "R2_LRG", "ERM", "ORACLE")
DEFAULT_METHODS = ("CLRG_SGD", "ERM")
LITERATURE_NAMES = {"CLRG_SGD": "C-LRG", "ERM": "ERM"}


def estimation_error(w, p: int, q: int) -> float:
    """Squared Euclidean distance from ``(1_p, 0_q)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (p + q,):
        raise DimensionMismatch(f"model has length {w.shape[0] if w.ndim else 0}, expected p+q={p + q}")
    target = np.concatenate([np.ones(p), np.zeros(q)])
    return float(np.sum((w - target) ** 2))


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark configuration.

    ``fixed_instance`` reuses the trial-0 SEM parameters for every trial so
    only the samples vary.  ``exact_max_rounds`` caps the empirical exact
    best-response runs, which can be slow on strongly correlated features.
    """

    setting: str = "F-HOM"
    p: int = 5
    q: int = 5
    sample_sizes: tuple = (20, 100, 250, 500, 750, 1000)
    trials: int = 10
    methods: tuple = DEFAULT_METHODS
    seed: int = 0
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    fixed_instance: bool = False
    independent_envs: bool = False
    exact_max_rounds: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "setting", self.setting.upper())
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(m.upper() for m in self.methods))
        if self.setting not in SETTINGS:
            raise ClrgError(f"unknown setting {self.setting!r}; expected one of {', '.join(SETTINGS)}")
        if self.trials < 1:
            raise ClrgError("trials must be at least 1")
        if not self.sample_sizes or list(self.sample_sizes) != sorted(set(self.sample_sizes)):
            raise ClrgError("sample_sizes must be a non-empty strictly ascending list")
        if self.sample_sizes[0] < 1:
            raise ClrgError("sample sizes must be positive")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ClrgError(f"unknown methods {unknown}; expected a subset of {', '.join(METHODS)}")


@dataclass
class CellResult:
    method: str
    n: int
    errors: list
    failures: list
    wall_time: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors)) if self.errors else math.nan

    @property
    def stderr(self) -> float:
        k = len(self.errors)
        return float(np.std(self.errors, ddof=1) / math.sqrt(k)) if k > 1 else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.errors)) if self.errors else math.nan


@dataclass
class ExperimentReport:
    """Aggregated errors per ``(method, n)`` plus per-trial fitted models."""

    spec: ExperimentSpec
    cells: dict
    models: dict = field(default_factory=dict)

    def cell(self, method: str, n: int) -> CellResult:
        return self.cells[(method.upper(), int(n))]

    def rows(self) -> list:
        out = []
        for n in self.spec.sample_sizes:
            for m in self.spec.methods:
                c = self.cells[(m, n)]
                out.append((self.spec.setting, m, n, c.mean, c.stderr, len(c.errors)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "method", "n", "mean_error", "stderr", "trials"])
        for setting, m, n, mean, se, k in self.rows():
            w.writerow([setting, m, n, repr(mean), repr(se), k])
        return buf.getvalue()

    def to_svg(self, log_y: bool = False, literature: bool = False) -> str:
        series = {}
        for m in self.spec.methods:
            xs = list(self.spec.sample_sizes)
            series[m] = (xs, [self.cells[(m, n)].mean for n in xs])
        dashed = []
        if literature:
            for m, name in LITERATURE_NAMES.items():
                rows = ten_dim_series(self.spec.setting, name)
                if m in self.spec.methods and rows:
                    label = f"{name} (literature)"
                    series[label] = ([r[0] for r in rows], [r[1] for r in rows])
                    dashed.append(label)
        return line_chart(series, title=f"{self.spec.setting}, p={self.spec.p}, q={self.spec.q}",
                          xlabel="samples per environment", ylabel="estimation error",
                          log_y=log_y, dashed=dashed)


def cell_seed(base: int, trial: int, n: int, purpose: int) -> int:
    """Deterministic 32-bit seed for one piece of one cell."""
    return int(np.random.SeedSequence([int(base), int(trial), int(n), int(purpose)]).generate_state(1)[0])


def fit_method(method: str, samples, p: int, q: int, params: DynamicsParams,
               exact_max_rounds: int = 2000) -> np.ndarray:
    method = method.upper()
    if method == "ORACLE":
        return np.concatenate([np.ones(p), np.zeros(q)])
    if method == "ERM":
        return pooled_empirical_erm(samples)
    if method == "CLRG_SGD":
        return sgd_brd(samples, params.with_(penalty="none")).ensemble
    if method == "ULRG":
        return sgd_brd(samples, params.with_(w_sup=math.inf, penalty="none")).ensemble
    if method == "RINF_LRG":
        return sgd_brd(samples, params.with_(w_sup=math.inf, penalty="linf")).ensemble
    if method == "R2_LRG":
        return sgd_brd(samples, params.with_(w_sup=math.inf, penalty="l2")).ensemble
    if method == "CLRG_EXACT":
        m1, m2 = (EnvironmentMoments.from_sample(s) for s in samples[:2])
        return exact_brd(m1, m2, params.with_(max_rounds=exact_max_rounds, trace_every=exact_max_rounds)).ensemble
    raise ClrgError(f"unknown method {method!r}")


def _run_cell(spec: ExperimentSpec, trial: int, n: int) -> tuple:
    inst_trial = 0 if spec.fixed_instance else trial
    cfg = preset(spec.setting, spec.p, spec.q, cell_seed(spec.seed, inst_trial, 0, 0),
                 independent_envs=spec.independent_envs)
    samples = sample_all(cfg, n, cell_seed(spec.seed, trial, n, 1))
    params = spec.dynamics.with_(seed=cell_seed(spec.seed, trial, n, 2), trace_every=10**9)
    out = []
    for m in spec.methods:
        t0 = time.perf_counter()
        try:
            w = fit_method(m, samples, spec.p, spec.q, params, spec.exact_max_rounds)
            out.append((m, w, estimation_error(w, spec.p, spec.q), None, time.perf_counter() - t0))
        except ClrgError as exc:
            out.append((m, None, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0))
    return trial, n, out


def thread_count() -> int:
    raw = os.environ.get("CLRG_THREADS", "").strip()
    if raw:
        try:
            k = int(raw)
        except ValueError as exc:
            raise ClrgError(f"CLRG_THREADS must be a positive integer, got {raw!r}") from exc
        if k < 1:
            raise ClrgError(f"CLRG_THREADS must be a positive integer, got {raw!r}")
        return k
    return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> ExperimentReport:
    """Run every ``(trial, n)`` cell and aggregate per ``(method, n)``.

    Method failures are recorded per trial and excluded from the mean rather
    than aborting the run.
    """
    workers = thread_count() if workers is None else max(1, workers)
    jobs = [(t, n) for t in range(spec.trials) for n in spec.sample_sizes]
    if workers == 1 or len(jobs) == 1:
        results = [_run_cell(spec, t, n) for t, n in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            futures = [pool.submit(_run_cell, spec, t, n) for t, n in jobs]
            results = [f.result() for f in futures]
    cells = {(m, n): CellResult(m, n, [], [], 0.0) for m in spec.methods for n in spec.sample_sizes}
    models: dict = {}
    for trial, n, out in sorted(results, key=lambda r: (r[0], r[1])):
        for m, w, err, fail, dt in out:
            c = cells[(m, n)]
            c.wall_time += dt
            if fail is None:
                c.errors.append(err)
                models[(m, n, trial)] = w
            else:
                c.failures.append((trial, fail))
    return ExperimentReport(spec=spec, cells=cells, models=models)


TABLE1_ROWS = (
    ("ORACLE", "ORACLE", 2.0),
    ("ULRG", "ULRG", 2.0),
    ("CLRG_SGD(w_sup=2)", "CLRG_SGD", 2.0),
    ("CLRG_SGD(w_sup=5)", "CLRG_SGD", 5.0),
    ("RINF_LRG", "RINF_LRG", 2.0),
    ("R2_LRG", "R2_LRG", 2.0),
    ("ERM", "ERM", 2.0),
)


@dataclass
class Table1Report:
    seed: int
    n: int
    models: dict
    errors: dict

    def csv_rows(self) -> list:
        return [(self.seed, name, float(m[0]), float(m[1]), self.errors[name]) for name, m in self.models.items()]


def table1_csv(reports: Sequence[Table1Report]) -> str:
    """One row per seed and method, followed by per-method medians (``seed = median``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "method", "w_causal", "w_spurious", "error"])
    for rep in reports:
        for seed, name, a, b, err in rep.csv_rows():
            w.writerow([seed, name, repr(a), repr(b), repr(err)])
    if reports:
        for name in reports[0].models:
            models = np.array([r.models[name] for r in reports])
            med = np.median(models, axis=0)
            err = float(np.median([r.errors[name] for r in reports]))
            w.writerow(["median", name, repr(float(med[0])), repr(float(med[1])), repr(err)])
    return buf.getvalue()


def table1_experiment(seed: int, n: int = 1000, params: Optional[DynamicsParams] = None) -> Table1Report:
    """2-D anti-causal comparison (one causal and one spurious feature, F-HOM)."""
    params = params or DynamicsParams()
    cfg = preset("F-HOM", 1, 1, cell_seed(seed, 0, 0, 0))
    samples = sample_all(cfg, n, cell_seed(seed, 0, n, 1))
    run_params = params.with_(seed=cell_seed(seed, 0, n, 2), trace_every=10**9)
    models, errors = {}, {}
    for name, method, w_sup in TABLE1_ROWS:
        w = fit_method(method, samples, 1, 1, run_params.with_(w_sup=w_sup))
        models[name] = w
        errors[name] = estimation_error(w, 1, 1)
    return Table1Report(seed=seed, n=n, models=models, errors=errors)
