"""Nash equilibria of the box-constrained linear regression game.

Every environment ``e`` owns a predictor ``w_e`` in the box
``W = {w : ||w||_inf <= w_sup}`` and minimizes the risk of the ensemble
``sum_e w_e`` on its own data.  When the spurious coefficients are
uncorrelated across components the equilibrium ensemble has a closed form
per component, computed here from the per-environment least-squares
solutions alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ClrgError, DimensionMismatch, HypothesisViolated, RealizabilityViolated
from .numerics import as_vector, min_eigenvalue
from .population import (
    EnvironmentMoments,
    LeastSquaresSolution,
    analytic_moments,
    confounder_closed_form,
    erm_solution,
)
from .sem import SemConfig

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class GameConfig:
    w_sup: float
    tolerance: float = 1e-9

    def __post_init__(self):
        if not (0 < self.w_sup < np.inf):
            raise ClrgError(f"w_sup must be positive and finite, got {self.w_sup}")
        if self.tolerance < 0:
            raise ClrgError(f"tolerance must be non-negative, got {self.tolerance}")


@dataclass(frozen=True)
class GameSolution:
    """Equilibrium strategies and their ensemble.

    ``boundary_flags[e, i]`` is ``+1`` if environment ``e`` sits at ``+w_sup``
    on component ``i``, ``-1`` at ``-w_sup`` and ``0`` in the interior.
    """

    strategies: tuple
    ensemble: np.ndarray
    boundary_flags: np.ndarray

    @classmethod
    def from_strategies(cls, strategies: Sequence[np.ndarray], w_sup: float) -> "GameSolution":
        strategies = tuple(np.asarray(s, dtype=float) for s in strategies)
        ensemble = np.sum(strategies, axis=0)
        flags = np.zeros((len(strategies), ensemble.shape[0]), dtype=int)
        for e, s in enumerate(strategies):
            flags[e, np.abs(s - w_sup) <= BOUNDARY_TOL] = 1
            flags[e, np.abs(s + w_sup) <= BOUNDARY_TOL] = -1
        return cls(strategies=strategies, ensemble=ensemble, boundary_flags=flags)


@dataclass(frozen=True)
class IndexSplit:
    """Components with equal (``u_set``) and differing (``v_set``) coefficients."""

    u_set: tuple
    v_set: tuple


class Stability(enum.Enum):
    STABLE_EQUAL = "StableEqual"
    STABLE_PSD_ZERO_MIN = "StablePsdZeroMin"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


def _coef(w) -> np.ndarray:
    if isinstance(w, LeastSquaresSolution):
        w = w.w_star
    return as_vector(w, "coefficients")


def _pair(w1, w2) -> tuple[np.ndarray, np.ndarray]:
    a, b = _coef(w1), _coef(w2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"coefficient vectors have lengths {a.shape[0]} and {b.shape[0]}")
    return a, b


def _sign(x: np.ndarray, tol: float) -> np.ndarray:
    s = np.sign(x)
    s[np.abs(x) <= tol] = 0.0
    return s


def index_split(w1, w2, tol: float = 1e-9) -> IndexSplit:
    a, b = _pair(w1, w2)
    same = np.abs(a - b) <= tol
    return IndexSplit(u_set=tuple(int(i) for i in np.flatnonzero(same)),
                      v_set=tuple(int(i) for i in np.flatnonzero(~same)))


def nash_ensemble(w1, w2, tol: float = 1e-9) -> np.ndarray:
    """Equilibrium ensemble of the two-environment game.

    Per component: zero when the two least-squares coefficients have strictly
    opposite signs, otherwise the coefficient of smaller magnitude (the first
    one on ties).  Values within ``tol`` of zero count as sign-less.
    """
    a, b = _pair(w1, w2)
    agree = _sign(a, tol) * _sign(b, tol) >= 0
    ma, mb = np.abs(a), np.abs(b)
    # A magnitude tie between different values means two sign-less values of
    # opposite sign; returning 0 there keeps the rule symmetric.
    smaller = np.where(mb > ma, a, np.where(ma > mb, b, np.where(a == b, a, 0.0)))
    return np.where(agree, smaller, 0.0)


def check_realizable(ws: Sequence[np.ndarray], w_sup: float) -> None:
    for e, w in enumerate(ws):
        if w.size == 0:
            continue
        i = int(np.argmax(np.abs(w)))
        if abs(w[i]) > w_sup:
            raise RealizabilityViolated(
                f"Realizability assumption violated: |w*_{e + 1},{i + 1}|={abs(w[i]):.6g} > w_sup={w_sup:g}"
            )


def nash_strategies(w1, w2, cfg: GameConfig) -> GameSolution:
    """Canonical equilibrium strategy pair.

    Opposite-sign components put each environment on the boundary of its own
    sign.  Same-sign components put the environment with the larger
    coefficient on the boundary and let the other absorb the remainder.
    Components that agree are split in half (any split is an equilibrium).
    """
    a, b = _pair(w1, w2)
    check_realizable([a, b], cfg.w_sup)
    tol = cfg.tolerance
    ws = cfg.w_sup
    sa, sb = _sign(a, tol), _sign(b, tol)
    ens = nash_ensemble(a, b, tol)
    s1 = np.empty_like(a)
    s2 = np.empty_like(b)
    for i in range(a.shape[0]):
        if abs(a[i] - b[i]) <= tol:
            s1[i] = s2[i] = 0.5 * ens[i]
        elif sa[i] * sb[i] < 0:
            s1[i], s2[i] = sa[i] * ws, sb[i] * ws
        elif abs(a[i]) <= abs(b[i]):
            sg = sb[i]
            # A sign-less a[i] of the other sign would step just outside the box.
            s1[i], s2[i] = min(max(ens[i] - sg * ws, -ws), ws), sg * ws
        else:
            sg = sa[i]
            s1[i], s2[i] = sg * ws, min(max(ens[i] - sg * ws, -ws), ws)
    return GameSolution.from_strategies([s1, s2], ws)


def nash_ensemble_multi(ws: Sequence, cfg: Optional[GameConfig] = None) -> np.ndarray:
    """Equilibrium ensemble for ``r >= 2`` environments (median rule).

    Per component the ``r`` coefficients are sorted; an odd ``r`` returns the
    median, an even ``r`` applies the two-environment rule to the middle pair.
    """
    tol = 1e-9 if cfg is None else cfg.tolerance
    mat = np.array([_coef(w) for w in ws])
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise DimensionMismatch("need at least two coefficient vectors of equal length")
    if cfg is not None:
        check_realizable(list(mat), cfg.w_sup)
    r = mat.shape[0]
    srt = np.sort(mat, axis=0)
    if r % 2 == 1:
        return srt[r // 2].copy()
    return nash_ensemble(srt[r // 2 - 1], srt[r // 2], tol=tol)


def ulrg_ne_exists(w1, w2, tol: float = 1e-9) -> bool:
    """The unconstrained game has a pure equilibrium iff the solutions agree."""
    a, b = _pair(w1, w2)
    return bool(np.max(np.abs(a - b), initial=0.0) <= tol)


def variational_stability_check(sigma1, sigma2, tol: float = 1e-9) -> Stability:
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if s1.shape != s2.shape or s1.ndim != 2:
        raise DimensionMismatch(f"matrices have shapes {s1.shape} and {s2.shape}")
    diff = s2 - s1
    if np.max(np.abs(diff), initial=0.0) <= tol:
        return Stability.STABLE_EQUAL
    for mat in (diff, -diff):
        lam = min_eigenvalue(mat)
        if -tol <= lam <= tol:
            return Stability.STABLE_PSD_ZERO_MIN
    return Stability.UNKNOWN


def utility_gradients(moments: Sequence[EnvironmentMoments], strategies: Sequence[np.ndarray]) -> list:
    """Gradient of ``-R_e`` with respect to ``w_e`` for every environment."""
    ens = np.sum(strategies, axis=0)
    return [-2.0 * (m.sigma @ ens - m.rho) for m in moments]


def variational_gap(moments: Sequence[EnvironmentMoments], equilibrium: Sequence[np.ndarray],
                    strategies: Sequence[np.ndarray]) -> float:
    """``sum_e v_e(w)^T (w_e - w_e^eq)``; non-positive under variational stability."""
    grads = utility_gradients(moments, strategies)
    return float(sum(g @ (w - w0) for g, w, w0 in zip(grads, strategies, equilibrium)))


def kkt_violation(m: EnvironmentMoments, own: np.ndarray, others: np.ndarray, w_sup: float) -> float:
    """Largest violation of the box-constrained optimality conditions of ``own``.

    The risk gradient must vanish on interior components, be non-positive at
    ``+w_sup`` and non-negative at ``-w_sup``.
    """
    g = 2.0 * (m.sigma @ (own + others) - m.rho)
    upper = np.abs(own - w_sup) <= BOUNDARY_TOL
    lower = np.abs(own + w_sup) <= BOUNDARY_TOL
    interior = ~(upper | lower)
    viol = np.zeros_like(g)
    viol[interior] = np.abs(g[interior])
    viol[upper] = np.maximum(g[upper], 0.0)
    viol[lower] = np.maximum(-g[lower], 0.0)
    return float(np.max(viol, initial=0.0))


@dataclass(frozen=True)
class DominanceReport:
    """Distances of the equilibrium ensemble and of ERM from the ideal model.

    ``exceptions[k]`` marks grid points where the two distances coincide
    (the degenerate mixtures at which ERM reproduces one environment's
    solution and that solution is also the equilibrium ensemble).
    """

    pi_grid: np.ndarray
    ensemble: np.ndarray
    d_ne: float
    d_ne_sq: float
    d_erm: np.ndarray
    d_erm_sq: np.ndarray
    exceptions: np.ndarray
    erm: np.ndarray = field(repr=False)

    def margins(self) -> np.ndarray:
        return self.d_erm_sq - self.d_ne_sq

    def holds(self, margin: float = 0.0) -> bool:
        m = self.margins()[~self.exceptions]
        return bool(np.all(m > margin))


def _is_orthogonal(theta: np.ndarray, tol: float) -> bool:
    q = theta.shape[0]
    return theta.shape == (q, q) and np.max(np.abs(theta @ theta.T - np.eye(q)), initial=0.0) <= tol


def dominance_certificate(cfg: SemConfig, pi_grid: Sequence[float], ideal=None,
                          w_sup: Optional[float] = None, tol: float = 1e-8,
                          equality_tol: float = 1e-12) -> DominanceReport:
    """Compare the equilibrium ensemble with ERM over a grid of mixture weights.

    Preconditions: two environments without anti-causal edges, orthogonal
    loadings, spurious coefficients that differ across environments, and
    least-squares solutions inside the box when ``w_sup`` is given.
    """
    if cfg.n_envs != 2:
        raise HypothesisViolated(f"dominance certificate is defined for two environments, got {cfg.n_envs}")
    for e in range(2):
        env = cfg.env(e)
        if env.alpha.size and np.max(np.abs(env.alpha)) > 0:
            raise HypothesisViolated(f"environment {e + 1} has an anti-causal edge (alpha != 0)")
        if not _is_orthogonal(env.theta, tol):
            raise HypothesisViolated(f"environment {e + 1} loading matrix is not orthogonal")
    w1 = confounder_closed_form(cfg, 0).w_star
    w2 = confounder_closed_form(cfg, 1).w_star
    if ulrg_ne_exists(w1[cfg.p:], w2[cfg.p:]):
        raise HypothesisViolated("spurious coefficients coincide across environments")
    if w_sup is not None:
        try:
            check_realizable([w1, w2], w_sup)
        except RealizabilityViolated as exc:
            raise HypothesisViolated(str(exc)) from exc
    if ideal is None:
        ideal = np.concatenate([cfg.gamma, np.zeros(cfg.q)])
    ideal = as_vector(ideal, "ideal")

    ens = nash_ensemble(w1, w2)
    m1, m2 = analytic_moments(cfg, 0), analytic_moments(cfg, 1)
    grid = np.asarray(list(pi_grid), dtype=float)
    erm = np.array([erm_solution(m1, m2, float(pi)) for pi in grid]).reshape(len(grid), cfg.d)
    d_ne_sq = float(np.sum((ens - ideal) ** 2))
    d_erm_sq = np.sum((erm - ideal) ** 2, axis=1)
    exceptions = np.abs(d_erm_sq - d_ne_sq) <= equality_tol * (1.0 + d_erm_sq)
    return DominanceReport(pi_grid=grid, ensemble=ens, d_ne=float(np.sqrt(d_ne_sq)), d_ne_sq=d_ne_sq,
                           d_erm=np.sqrt(d_erm_sq), d_erm_sq=d_erm_sq, exceptions=exceptions, erm=erm)
