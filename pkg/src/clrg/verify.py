"""Seeded property checks over the whole library, runnable from the CLI."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import dynamics as dyn
from .game import (
    GameConfig,
    kkt_violation,
    nash_ensemble,
    nash_ensemble_multi,
    nash_strategies,
)
from .instances import random_spd, separable_instance
from .numerics import clamp_linf, empirical_moments, min_eigenvalue, solve_spd
from .population import (
    analytic_moments,
    confounder_closed_form,
    erm_solution,
    least_squares,
    population_moments,
)
from .sem import SETTINGS, EnvParams, SemConfig, preset, sample_environment

PROPERTIES: list = []


def prop(name: str) -> Callable:
    def deco(fn):
        PROPERTIES.append((name, fn))
        return fn
    return deco


@prop("solve_spd residual bound up to d=50")
def _solve_residual(rng):
    for d in (1, 2, 5, 20, 50):
        a = random_spd(d, rng, cond=1e3)
        b = rng.standard_normal(d)
        x = solve_spd(a, b)
        if np.linalg.norm(a @ x - b) > 1e-8 * (np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)):
            return False
    return True


@prop("empirical second moment symmetric and PSD")
def _moments_psd(rng):
    for _ in range(20):
        n, d = rng.integers(1, 30), rng.integers(1, 8)
        sigma, _, _ = empirical_moments(rng.standard_normal((n, d)), rng.standard_normal(n))
        if not np.array_equal(sigma, sigma.T) or min_eigenvalue(sigma) < -1e-10:
            return False
    return True


@prop("clamp is idempotent and non-expansive")
def _clamp(rng):
    for _ in range(200):
        u, v = rng.normal(0, 3, 6), rng.normal(0, 3, 6)
        ws = rng.uniform(0.1, 4)
        cu, cv = clamp_linf(u, ws), clamp_linf(v, ws)
        if not np.array_equal(clamp_linf(cu, ws), cu):
            return False
        if np.max(np.abs(cu - cv)) > np.max(np.abs(u - v)) + 1e-15:
            return False
    return True


@prop("min eigenvalue below every Rayleigh quotient")
def _rayleigh(rng):
    for _ in range(50):
        a = rng.standard_normal((6, 6))
        a = a + a.T
        v = rng.standard_normal(6)
        if min_eigenvalue(a) > v @ a @ v / (v @ v) + 1e-8:
            return False
    return True


@prop("equilibrium ensemble symmetric in the two environments")
def _symmetry(rng):
    for _ in range(1000):
        a, b = rng.uniform(-2, 2, 5), rng.uniform(-2, 2, 5)
        b[0] = a[0]
        if not np.array_equal(nash_ensemble(a, b), nash_ensemble(b, a)):
            return False
    return True


@prop("equilibrium ensemble scale equivariant")
def _scale(rng):
    for _ in range(1000):
        a, b = rng.uniform(-2, 2, 4), rng.uniform(-2, 2, 4)
        c = rng.uniform(0.1, 10) * rng.choice([-1, 1])
        if not np.allclose(nash_ensemble(c * a, c * b), c * nash_ensemble(a, b), rtol=0, atol=1e-12):
            return False
    return True


@prop("equilibrium strategies: sum, box and boundary flags")
def _strategies(rng):
    for _ in range(500):
        ws = rng.uniform(0.5, 4)
        a, b = rng.uniform(-ws, ws, 5), rng.uniform(-ws, ws, 5)
        sol = nash_strategies(a, b, GameConfig(ws))
        if not np.allclose(sol.ensemble, nash_ensemble(a, b), rtol=0, atol=1e-12 * max(1.0, ws)):
            return False
        if not np.array_equal(sol.ensemble, sol.strategies[0] + sol.strategies[1]):
            return False
        for e, s in enumerate(sol.strategies):
            if np.max(np.abs(s)) > ws + 1e-12:
                return False
            expect = np.where(np.abs(s - ws) <= 1e-12, 1, np.where(np.abs(s + ws) <= 1e-12, -1, 0))
            if not np.array_equal(sol.boundary_flags[e], expect):
                return False
    return True


@prop("equilibrium strategies satisfy both players' optimality conditions")
def _kkt(rng):
    for _ in range(100):
        inst = separable_instance(rng, 5, rng.uniform(1, 4))
        sol = nash_strategies(*inst.stars, GameConfig(inst.w_sup))
        s1, s2 = sol.strategies
        scale = max(1.0, inst.w_sup)
        if kkt_violation(inst.moments[0], s1, s2, inst.w_sup) > 1e-9 * scale:
            return False
        if kkt_violation(inst.moments[1], s2, s1, inst.w_sup) > 1e-9 * scale:
            return False
    return True


@prop("median rule with two environments equals the pairwise rule")
def _multi_pair(rng):
    a = rng.uniform(-2, 2, (10_000, 3))
    b = rng.uniform(-2, 2, (10_000, 3))
    for x, y in zip(a, b):
        if not np.array_equal(nash_ensemble_multi([x, y]), nash_ensemble(x, y)):
            return False
    return True


@prop("exact and clamp best responses reach the equilibrium ensemble")
def _brd(rng):
    for _ in range(20):
        inst = separable_instance(rng, int(rng.integers(1, 7)), rng.uniform(1, 4), n_shared=int(rng.integers(0, 2)))
        params = dyn.DynamicsParams(w_sup=inst.w_sup)
        target = nash_ensemble(*inst.stars)
        ex = dyn.exact_brd(*inst.moments, params)
        cl = dyn.clamp_brd(*inst.stars, params)
        if not (ex.converged and cl.converged):
            return False
        if max(np.max(np.abs(ex.ensemble - target)), np.max(np.abs(cl.ensemble - target))) > 1e-8:
            return False
    return True


@prop("best-response round count within the gap bound")
def _round_bound(rng):
    for _ in range(20):
        inst = separable_instance(rng, 4, rng.uniform(1, 4))
        bound = dyn.iteration_bound(*inst.stars, inst.w_sup)
        if dyn.exact_brd(*inst.moments, dyn.DynamicsParams(w_sup=inst.w_sup)).n_rounds > math.ceil(bound) + 2:
            return False
    return True


@prop("acting environment never increases its own risk")
def _monotone(rng):
    for _ in range(10):
        inst = separable_instance(rng, 4, 2.0, n_shared=2)
        tr = dyn.exact_brd(*inst.moments, dyn.DynamicsParams(w_sup=2.0))
        if any(after > before + 1e-12 * max(1.0, abs(before)) for _, _, before, after in tr.turns):
            return False
    return True


@prop("three routes to the per-environment solution agree")
def _routes(rng):
    for setting in SETTINGS:
        base = preset(setting, 3, 3, int(rng.integers(1 << 30)))
        envs = [EnvParams(alpha=np.zeros(3), theta=e.theta, eta=e.eta, sigma_eps=e.sigma_eps,
                          sigma_zeta=e.sigma_zeta, sigma_h=e.sigma_h, sigma_x1=e.sigma_x1) for e in base.envs]
        cfg = SemConfig(p=3, q=3, s=3, gamma=base.gamma, envs=envs)
        for e in range(2):
            cf = confounder_closed_form(cfg, e).w_star
            ls = least_squares(analytic_moments(cfg, e)).w_star
            if np.max(np.abs(cf - ls)) > 1e-8 or not np.array_equal(cf[:3], cfg.gamma):
                return False
    return True


@prop("ERM solution continuous in the mixture weight")
def _erm_cont(rng):
    cfg = preset("P-HET", 3, 3, int(rng.integers(1 << 30)))
    m1, m2 = population_moments(cfg, 0), population_moments(cfg, 1)
    for pi in np.linspace(0, 1 - 1e-6, 25):
        if np.linalg.norm(erm_solution(m1, m2, pi) - erm_solution(m1, m2, pi + 1e-6)) > 1e-3:
            return False
    return True


@prop("sampling and SGD dynamics are seed deterministic")
def _determinism(rng):
    cfg = preset("F-HOM", 2, 2, int(rng.integers(1 << 30)))
    s1 = [sample_environment(cfg, e, 200, 3) for e in range(2)]
    s2 = [sample_environment(cfg, e, 200, 3) for e in range(2)]
    if any(a.x.tobytes() != b.x.tobytes() or a.y.tobytes() != b.y.tobytes() for a, b in zip(s1, s2)):
        return False
    params = dyn.DynamicsParams(epochs=5, seed=11)
    t1, t2 = dyn.sgd_brd(s1, params), dyn.sgd_brd(s2, params)
    return all(np.array_equal(a.ensemble, b.ensemble) for a, b in zip(t1.rounds, t2.rounds))


@prop("unconstrained dynamics grow without bound when solutions differ")
def _diverge(rng):
    for _ in range(10):
        a, b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        tr = dyn.clamp_brd(a, b, dyn.DynamicsParams(w_sup=1e6, max_rounds=100_000, divergence_threshold=1e3,
                                                    trace_every=1000))
        if tr.stop_reason != "diverged":
            return False
    return True


def run_all(seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    ok_all = True
    for k, (name, fn) in enumerate(PROPERTIES):
        rng = np.random.default_rng([seed, k])
        try:
            ok = bool(fn(rng))
            detail = ""
        except Exception as exc:  # a crashing property counts as a failure
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}{detail}")
    return ok_all
