"""Best-response dynamics that learn the equilibrium of the regression game.

Four dynamics are provided:

* ``exact_brd``: every environment in turn minimizes its own risk over the
  box given the others' current predictors.
* ``clamp_brd``: the same alternation expressed through the least-squares
  solutions only, ``w_e <- clamp(w_e* - w_{-e})``.
* ``signed_grad_brd``: simultaneous fixed-size steps in the direction of the
  best response, which settles into a small oscillation band.
* ``sgd_brd``: alternating projected minibatch gradient steps on samples,
  optionally with an l_inf or squared l2 penalty on each predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ClrgError, EmptySample, EmptyVSet
from .game import IndexSplit, check_realizable, index_split
from .numerics import as_vector, solve_spd
from .population import EnvironmentMoments
from .sem import EnvSample

PENALTIES = ("none", "linf", "l2")
STOP_REASONS = ("tolerance", "max_rounds", "oscillation_detected", "diverged")


@dataclass(frozen=True)
class DynamicsParams:
    """Knobs shared by all dynamics; each dynamic reads the ones it needs.

    ``w_sup = inf`` removes the constraint.  ``divergence_threshold`` stops
    a run once any strategy exceeds it in max-norm (used to demonstrate
    unbounded growth without running forever).  ``trace_every`` thins the
    recorded rounds; the final state is always recorded.
    """

    w_sup: float = 2.0
    tol: float = 1e-10
    max_rounds: int = 10_000
    beta: float = 0.005
    batch_size: int = 128
    epochs: int = 200
    penalty: str = "none"
    lam: float = 0.1
    seed: int = 0
    env_order: tuple = ()
    inner_tol: float = 1e-12
    inner_max_sweeps: int = 10_000
    trace_every: int = 1
    divergence_threshold: Optional[float] = None
    max_period: int = 12
    band_window: int = 64

    def __post_init__(self):
        if not self.w_sup > 0:
            raise ClrgError(f"w_sup must be positive, got {self.w_sup}")
        if not self.tol > 0:
            raise ClrgError(f"tol must be positive, got {self.tol}")
        if self.max_rounds < 1:
            raise ClrgError(f"max_rounds must be at least 1, got {self.max_rounds}")
        if not self.beta > 0:
            raise ClrgError(f"beta must be positive, got {self.beta}")
        if self.batch_size < 1 or self.epochs < 1 or self.trace_every < 1:
            raise ClrgError("batch_size, epochs and trace_every must be at least 1")
        if self.penalty not in PENALTIES:
            raise ClrgError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.lam < 0:
            raise ClrgError(f"penalty weight must be non-negative, got {self.lam}")

    def with_(self, **kw) -> "DynamicsParams":
        return replace(self, **kw)

    def order(self, r: int) -> list:
        order = list(self.env_order) if self.env_order else list(range(r))
        if sorted(order) != list(range(r)):
            raise ClrgError(f"env_order {self.env_order} is not a permutation of {r} environments")
        return order


@dataclass(frozen=True)
class DynamicsRound:
    index: int
    strategies: tuple
    ensemble: np.ndarray
    risks: Optional[tuple] = None


@dataclass
class DynamicsTrace:
    """Recorded rounds plus the terminal state of a dynamic.

    ``ensemble`` is the reported output: the final ensemble, or the center of
    the oscillation band when one was detected.  ``turns`` lists
    ``(round, env, risk_before, risk_after)`` for exact best responses.
    """

    rounds: list
    converged: bool
    stop_reason: str
    n_rounds: int
    final_strategies: tuple
    band_center: Optional[np.ndarray] = None
    band_period: Optional[int] = None
    turns: list = field(default_factory=list)

    @property
    def final_ensemble(self) -> np.ndarray:
        return np.sum(self.final_strategies, axis=0)

    @property
    def ensemble(self) -> np.ndarray:
        return self.band_center if self.band_center is not None else self.final_ensemble

    def max_strategy_norm(self) -> float:
        return max(float(np.max(np.abs(s), initial=0.0)) for r in self.rounds for s in r.strategies)


def _record(rounds: list, index: int, strategies: Sequence[np.ndarray],
            moments: Optional[Sequence[EnvironmentMoments]] = None) -> None:
    strat = tuple(np.array(s, dtype=float) for s in strategies)
    ens = np.sum(strat, axis=0)
    risks = None if moments is None else tuple(m.risk(ens) for m in moments)
    rounds.append(DynamicsRound(index=index, strategies=strat, ensemble=ens, risks=risks))


def box_qp_best_response(m: EnvironmentMoments, others: np.ndarray, start: np.ndarray,
                         w_sup: float, tol: float = 1e-12, max_sweeps: int = 10_000) -> np.ndarray:
    """Minimize ``R(w + others)`` over ``||w||_inf <= w_sup`` by cyclic coordinate descent.

    Each coordinate step minimizes the quadratic exactly along that axis and
    clamps to the box.  Sweeps stop once no coordinate moves by more than
    ``tol``.
    """
    sigma, rho = m.sigma, m.rho
    w = np.array(start, dtype=float)
    resid = sigma @ (w + others) - rho
    diag = np.diag(sigma)
    d = w.shape[0]
    for _ in range(max_sweeps):
        biggest = 0.0
        for i in range(d):
            new = w[i] - resid[i] / diag[i]
            if new > w_sup:
                new = w_sup
            elif new < -w_sup:
                new = -w_sup
            step = new - w[i]
            if step != 0.0:
                w[i] = new
                resid += sigma[:, i] * step
                biggest = max(biggest, abs(step))
        if biggest <= tol:
            break
    return w


def exact_brd_multi(moments: Sequence[EnvironmentMoments], params: DynamicsParams) -> DynamicsTrace:
    """Round-robin exact best responses for any number of environments.

    All strategies start at zero.  One round lets every environment move
    once, in ``params.order``; the run stops after the first round in which
    no strategy moved by more than ``params.tol`` in max-norm.
    """
    r = len(moments)
    if r < 2:
        raise ClrgError("best-response dynamics need at least two environments")
    d = moments[0].d
    for m in moments:
        # Rejects singular moments before iterating; the solution itself is unused.
        solve_spd(m.sigma, m.rho)
    order = params.order(r)
    strategies = [np.zeros(d) for _ in range(r)]
    rounds: list = []
    turns: list = []
    _record(rounds, 0, strategies, moments)
    converged = False
    stop = "max_rounds"
    t = 0
    for t in range(1, params.max_rounds + 1):
        diff = 0.0
        for e in order:
            others = np.sum([strategies[k] for k in range(r) if k != e], axis=0)
            before = moments[e].risk(strategies[e] + others)
            new = box_qp_best_response(moments[e], others, strategies[e], params.w_sup,
                                       params.inner_tol, params.inner_max_sweeps)
            diff = max(diff, float(np.max(np.abs(new - strategies[e]), initial=0.0)))
            strategies[e] = new
            turns.append((t, e, before, moments[e].risk(new + others)))
        if t % params.trace_every == 0:
            _record(rounds, t, strategies, moments)
        if diff <= params.tol:
            converged, stop = True, "tolerance"
            break
    if rounds[-1].index != t:
        _record(rounds, t, strategies, moments)
    return DynamicsTrace(rounds=rounds, converged=converged, stop_reason=stop, n_rounds=t,
                         final_strategies=tuple(strategies), turns=turns)


def exact_brd(m1: EnvironmentMoments, m2: EnvironmentMoments, params: DynamicsParams) -> DynamicsTrace:
    """Two-environment exact best-response dynamics starting from zero."""
    return exact_brd_multi([m1, m2], params)


def _stars(w1_star, w2_star, params: DynamicsParams) -> tuple[np.ndarray, np.ndarray]:
    a = as_vector(w1_star, "w1_star")
    b = as_vector(w2_star, "w2_star")
    if a.shape != b.shape:
        raise ClrgError(f"least-squares solutions have lengths {a.shape[0]} and {b.shape[0]}")
    check_realizable([a, b], params.w_sup)
    return a, b


def clamp_brd(w1_star, w2_star, params: DynamicsParams) -> DynamicsTrace:
    """Alternating ``w_e <- clamp(w_e* - w_{-e})`` from zero.

    A round is one move by each environment, as in :func:`exact_brd`.
    """
    stars = _stars(w1_star, w2_star, params)
    order = params.order(2)
    strategies = [np.zeros_like(stars[0]), np.zeros_like(stars[0])]
    rounds: list = []
    _record(rounds, 0, strategies)
    converged, stop = False, "max_rounds"
    t = 0
    for t in range(1, params.max_rounds + 1):
        diff = 0.0
        for e in order:
            new = np.clip(stars[e] - strategies[1 - e], -params.w_sup, params.w_sup)
            diff = max(diff, float(np.max(np.abs(new - strategies[e]), initial=0.0)))
            strategies[e] = new
        if t % params.trace_every == 0:
            _record(rounds, t, strategies)
        if diff <= params.tol:
            converged, stop = True, "tolerance"
            break
        if params.divergence_threshold is not None and max(
                np.max(np.abs(s)) for s in strategies) > params.divergence_threshold:
            stop = "diverged"
            break
    if rounds[-1].index != t:
        _record(rounds, t, strategies)
    return DynamicsTrace(rounds=rounds, converged=converged, stop_reason=stop, n_rounds=t,
                         final_strategies=tuple(strategies))


def _sgn(x: np.ndarray) -> np.ndarray:
    # sgn(0) = +1 so a player that sits exactly at its target keeps moving
    # and the band stays symmetric around it.
    return np.where(x >= 0, 1.0, -1.0)


def signed_grad_brd(w1_star, w2_star, params: DynamicsParams) -> DynamicsTrace:
    """Simultaneous signed steps toward each environment's best response.

    Environment ``e`` moves by ``beta`` in the direction of
    ``w_e* - w_{-e} - w_e`` and is projected onto the box.  The iterates do
    not converge to a point; the run stops when the joint state repeats with
    period at most ``params.max_period`` (within 1e-12) and reports the mean
    ensemble over one period as the band center.  Without a detected cycle
    the center is the mean over the last ``params.band_window`` rounds.
    """
    a, b = _stars(w1_star, w2_star, params)
    beta, ws = params.beta, params.w_sup
    w1 = np.zeros_like(a)
    w2 = np.zeros_like(b)
    rounds: list = []
    _record(rounds, 0, [w1, w2])
    history: list = []
    stop, period = "max_rounds", None
    t = 0
    for t in range(1, params.max_rounds + 1):
        n1 = np.clip(w1 + beta * _sgn(a - w2 - w1), -ws, ws)
        n2 = np.clip(w2 + beta * _sgn(b - w1 - w2), -ws, ws)
        w1, w2 = n1, n2
        history.append(np.concatenate([w1, w2]))
        if len(history) > params.max_period + params.band_window:
            history.pop(0)
        if t % params.trace_every == 0:
            _record(rounds, t, [w1, w2])
        for k in range(1, min(params.max_period, len(history) - 1) + 1):
            if np.max(np.abs(history[-1] - history[-1 - k])) <= 1e-12:
                period = k
                break
        if period is not None:
            stop = "oscillation_detected"
            break
    if rounds[-1].index != t:
        _record(rounds, t, [w1, w2])
    window = history[-period:] if period is not None else history
    d = a.shape[0]
    center = np.mean([h[:d] + h[d:] for h in window], axis=0)
    return DynamicsTrace(rounds=rounds, converged=period is not None, stop_reason=stop, n_rounds=t,
                         final_strategies=(w1, w2), band_center=center, band_period=period)


class _BatchStream:
    """Endless minibatches from one environment, reshuffled every epoch."""

    def __init__(self, sample: EnvSample, batch_size: int, rng: np.random.Generator):
        self.x, self.y = sample.x, sample.y
        self.batch = batch_size
        self.rng = rng
        self.perm = rng.permutation(sample.n)
        self.pos = 0

    def next(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.y.shape[0]
        if self.pos >= n:
            self.perm = self.rng.permutation(n)
            self.pos = 0
        idx = self.perm[self.pos:self.pos + self.batch]
        self.pos += self.batch
        return self.x[idx], self.y[idx]


def penalty_gradient(w: np.ndarray, kind: str, lam: float) -> np.ndarray:
    """(Sub)gradient of ``lam * ||w||_inf`` or ``lam * ||w||^2``.

    For the l_inf norm the unit mass is split equally over the components
    attaining the maximum magnitude; at ``w = 0`` the zero subgradient is used.
    """
    if kind == "none" or lam == 0:
        return np.zeros_like(w)
    if kind == "l2":
        return 2.0 * lam * w
    mag = np.abs(w)
    top = mag.max(initial=0.0)
    if top == 0.0:
        return np.zeros_like(w)
    hit = mag == top
    return lam * np.sign(w) * hit / hit.sum()


def sgd_brd(samples: Sequence[EnvSample], params: DynamicsParams) -> DynamicsTrace:
    """Alternating projected minibatch gradient steps, environment 1 first.

    Each environment takes ``epochs * ceil(n_max / batch_size)`` turns, where
    ``n_max`` is the largest per-environment sample size; one round is one
    turn of every environment.  The gradient for environment ``e`` is taken
    with respect to ``w_e`` of its minibatch squared loss on the ensemble,
    plus the penalty gradient.  The run always uses the full budget, so the
    trace reports ``stop_reason = "max_rounds"`` and ``converged = False``.
    """
    if len(samples) < 2:
        raise ClrgError("need samples from at least two environments")
    for s in samples:
        if s.n < 1:
            raise EmptySample(f"environment {s.env_index} has no samples")
    d = samples[0].x.shape[1]
    r = len(samples)
    order = params.order(r)
    streams = [_BatchStream(s, params.batch_size, np.random.default_rng([params.seed, e]))
               for e, s in enumerate(samples)]
    per_epoch = math.ceil(max(s.n for s in samples) / params.batch_size)
    total = params.epochs * per_epoch
    strategies = [np.zeros(d) for _ in range(r)]
    ens = np.zeros(d)
    rounds: list = []
    _record(rounds, 0, strategies)
    beta, ws = params.beta, params.w_sup
    for t in range(1, total + 1):
        for e in order:
            xb, yb = streams[e].next()
            grad = -2.0 * xb.T @ (yb - xb @ ens) / yb.shape[0]
            grad += penalty_gradient(strategies[e], params.penalty, params.lam)
            new = strategies[e] - beta * grad
            if np.isfinite(ws):
                new = np.clip(new, -ws, ws)
            strategies[e] = new
            ens = np.sum(strategies, axis=0)
        if t % params.trace_every == 0:
            _record(rounds, t, strategies)
    if rounds[-1].index != total:
        _record(rounds, total, strategies)
    return DynamicsTrace(rounds=rounds, converged=False, stop_reason="max_rounds", n_rounds=total,
                         final_strategies=tuple(strategies))


def iteration_bound(w1_star, w2_star, w_sup: float, split: Optional[IndexSplit] = None,
                    tol: float = 1e-9) -> float:
    """``2 w_sup / Delta_min`` with ``Delta_min`` the smallest gap on the V set."""
    a = as_vector(w1_star, "w1_star")
    b = as_vector(w2_star, "w2_star")
    if split is None:
        split = index_split(a, b, tol)
    if not split.v_set:
        raise EmptyVSet("no coefficient differs across environments; the dynamics settle after one round")
    v = list(split.v_set)
    return 2.0 * w_sup / float(np.min(np.abs(a[v] - b[v])))
