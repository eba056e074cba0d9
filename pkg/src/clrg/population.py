"""Least-squares solutions per environment and pooled (ERM) solutions.

Moments are uncentered: ``sigma = E[X X^T]``, ``rho = E[X Y]``.  Population
moments are available in closed form for every SEM configuration; the
confounder-only routes additionally require ``alpha = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AntiCausalPresent, ClrgError, DimensionMismatch, EmptySample
from .numerics import empirical_moments, solve_spd
from .sem import EnvSample, SemConfig, spurious_coefficients, stack_samples


@dataclass(frozen=True)
class EnvironmentMoments:
    """Second moments of one environment.

    ``source`` is ``"analytic"`` or ``"empirical"``; ``n`` is the sample
    size for empirical moments.  ``y2`` is ``E[Y^2]`` when known and is only
    needed to report absolute risk values.
    """

    sigma: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    source: str = "analytic"
    n: Optional[int] = None
    y2: Optional[float] = None

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        rho = np.array(self.rho, dtype=float).reshape(-1)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        d = rho.shape[0]
        if sigma.shape != (d, d) or mu.shape != (d,):
            raise DimensionMismatch(f"moment shapes sigma={sigma.shape}, rho={rho.shape}, mu={mu.shape} disagree")
        if d and np.max(np.abs(sigma - sigma.T)) > 1e-10:
            raise ClrgError("second-moment matrix must be symmetric")
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mu", mu)

    @property
    def d(self) -> int:
        return self.rho.shape[0]

    def risk(self, w) -> float:
        """``E[(Y - w^T X)^2]``, or the risk up to the constant ``E[Y^2]`` if unknown."""
        w = np.asarray(w, dtype=float)
        base = 0.0 if self.y2 is None else self.y2
        return float(w @ self.sigma @ w - 2.0 * self.rho @ w + base)

    @classmethod
    def from_sample(cls, sample: EnvSample) -> "EnvironmentMoments":
        sigma, rho, mu = empirical_moments(sample.x, sample.y)
        return cls(sigma=sigma, rho=rho, mu=mu, source="empirical", n=sample.n,
                   y2=float(sample.y @ sample.y / sample.n))


@dataclass(frozen=True)
class LeastSquaresSolution:
    w_star: np.ndarray
    p: Optional[int] = None

    @property
    def w_inv(self) -> np.ndarray:
        return self.w_star[: self.p] if self.p is not None else self.w_star[:0]

    @property
    def w_var(self) -> np.ndarray:
        return self.w_star[self.p:] if self.p is not None else self.w_star


def least_squares(m: EnvironmentMoments, p: Optional[int] = None) -> LeastSquaresSolution:
    """Risk minimizer ``sigma^{-1} rho`` of one environment."""
    return LeastSquaresSolution(w_star=solve_spd(m.sigma, m.rho), p=p)


def _require_no_anticausal(cfg: SemConfig, env: int) -> None:
    alpha = cfg.env(env).alpha
    if alpha.size and np.max(np.abs(alpha)) > 0:
        raise AntiCausalPresent(
            f"confounder-only formula needs alpha = 0 in environment {env}, "
            f"got max |alpha| = {np.max(np.abs(alpha)):.3g}"
        )


def confounder_closed_form(cfg: SemConfig, env: int) -> LeastSquaresSolution:
    """``(gamma, (s_h^2 Theta Theta^T + diag sigma_zeta^2)^{-1} s_h^2 Theta eta)``.

    With unit confounder scale this is the familiar
    ``(Theta Theta^T + diag sigma_zeta^2)^{-1} Theta eta`` spurious block.
    """
    params = cfg.env(env)
    _require_no_anticausal(cfg, env)
    var = spurious_coefficients(params.theta, params.eta, params.sigma_zeta, params.sigma_h)
    return LeastSquaresSolution(w_star=np.concatenate([cfg.gamma, var]), p=cfg.p)


def population_moments(cfg: SemConfig, env: int) -> EnvironmentMoments:
    """Exact moments of environment ``env`` for arbitrary ``alpha``.

    With ``v_y = Var(Y)`` and ``c = s_h^2 Theta eta = Cov(X2 noise part, Y)``::

        Sigma_11 = diag(sigma_x1^2)
        Sigma_12 = Sigma_11 gamma alpha^T
        Sigma_22 = v_y alpha alpha^T + alpha c^T + c alpha^T
                   + s_h^2 Theta Theta^T + diag(sigma_zeta^2)
        rho      = (Sigma_11 gamma, v_y alpha + c)
    """
    params = cfg.env(env)
    var_h = params.sigma_h ** 2
    s11 = np.diag(params.sigma_x1 ** 2)
    g = cfg.gamma
    alpha = params.alpha
    vy = float(g @ s11 @ g + var_h * params.eta @ params.eta + params.sigma_eps ** 2)
    c = var_h * params.theta @ params.eta
    s12 = np.outer(s11 @ g, alpha)
    s22 = (vy * np.outer(alpha, alpha) + np.outer(alpha, c) + np.outer(c, alpha)
           + var_h * params.theta @ params.theta.T + np.diag(params.sigma_zeta ** 2))
    sigma = np.block([[s11, s12], [s12.T, s22]])
    rho = np.concatenate([s11 @ g, vy * alpha + c])
    return EnvironmentMoments(sigma=sigma, rho=rho, mu=np.zeros(cfg.d), source="analytic", y2=vy)


def analytic_moments(cfg: SemConfig, env: int) -> EnvironmentMoments:
    """Block-diagonal moments of a confounder-only environment (``alpha = 0``)."""
    _require_no_anticausal(cfg, env)
    return population_moments(cfg, env)


def erm_solution(m1: EnvironmentMoments, m2: EnvironmentMoments, pi1: float) -> np.ndarray:
    """Minimizer of the ``pi1``-weighted mixture of the two environment risks."""
    if not 0.0 <= pi1 <= 1.0:
        raise ClrgError(f"mixture weight must lie in [0, 1], got {pi1}")
    if m1.d != m2.d:
        raise DimensionMismatch(f"environments have dimensions {m1.d} and {m2.d}")
    sigma = pi1 * m1.sigma + (1.0 - pi1) * m2.sigma
    rho = pi1 * m1.rho + (1.0 - pi1) * m2.rho
    return solve_spd(sigma, rho)


def pooled_empirical_erm(samples: Sequence[EnvSample]) -> np.ndarray:
    """Ordinary least squares on the concatenation of all samples."""
    if not samples:
        raise EmptySample("no samples to pool")
    x, y = stack_samples(samples)
    if x.shape[0] < x.shape[1]:
        raise ClrgError(f"pooled sample has {x.shape[0]} rows for {x.shape[1]} features; need n >= d")
    sigma, rho, _ = empirical_moments(x, y)
    return solve_spd(sigma, rho)
