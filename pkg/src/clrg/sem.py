"""Linear structural equation model for multi-environment regression data.

Each environment ``e`` generates

    X1 ~ N(0, diag(sigma_x1^2)),  H ~ N(0, sigma_h^2 I_s)
    Y  = gamma^T X1 + eta_e^T H + eps_e
    X2 = alpha_e Y + Theta_e H + zeta_e

with the causal weights ``gamma`` shared across environments.  Features are
laid out as ``(X1, X2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ClrgError, DimensionMismatch, InvalidEnvIndex, NotOrthogonal
from .numerics import solve_spd

SETTINGS = ("F-HOM", "P-HOM", "F-HET", "P-HET")

# Stream tags keep parameter draws and sample draws on disjoint substreams.
_TAG_SAMPLES = 0
_TAG_PARAMS = 1


@dataclass(frozen=True)
class EnvParams:
    alpha: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    sigma_eps: float
    sigma_zeta: np.ndarray
    sigma_h: float
    sigma_x1: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "eta", "sigma_zeta", "sigma_x1"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float).reshape(-1))
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2:
            theta = theta.reshape(self.alpha.shape[0], -1)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma_eps", float(self.sigma_eps))
        object.__setattr__(self, "sigma_h", float(self.sigma_h))
        if not self.sigma_eps > 0:
            raise ClrgError(f"sigma_eps must be positive, got {self.sigma_eps}")
        if np.any(self.sigma_zeta <= 0):
            raise ClrgError("all sigma_zeta components must be positive (spurious noise must be non-degenerate)")
        if self.sigma_h < 0:
            raise ClrgError(f"sigma_h must be non-negative, got {self.sigma_h}")
        if np.any(self.sigma_x1 <= 0):
            raise ClrgError("all sigma_x1 components must be positive")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "theta": self.theta.tolist(),
            "eta": self.eta.tolist(),
            "sigma_eps": self.sigma_eps,
            "sigma_zeta": self.sigma_zeta.tolist(),
            "sigma_h": self.sigma_h,
            "sigma_x1": self.sigma_x1.tolist(),
        }


@dataclass(frozen=True)
class SemConfig:
    """Full parameterization of the SEM over all environments.

    ``assumption_flags`` records hypothesis checks performed at construction
    time (for example whether the spurious coefficients differ across
    environments); it does not affect sampling.
    """

    p: int
    q: int
    s: int
    gamma: np.ndarray
    envs: tuple
    assumption_flags: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.array(self.gamma, dtype=float).reshape(-1))
        object.__setattr__(self, "envs", tuple(self.envs))
        if self.p < 1 or self.q < 0 or self.s < 0:
            raise ClrgError(f"need p >= 1, q >= 0, s >= 0; got p={self.p}, q={self.q}, s={self.s}")
        if self.gamma.shape != (self.p,):
            raise DimensionMismatch(f"gamma has length {self.gamma.shape[0]}, expected p={self.p}")
        if len(self.envs) < 2:
            raise ClrgError("at least two environments are required")
        for e, env in enumerate(self.envs):
            if env.alpha.shape != (self.q,) or env.sigma_zeta.shape != (self.q,):
                raise DimensionMismatch(f"environment {e}: alpha/sigma_zeta must have length q={self.q}")
            if env.theta.shape != (self.q, self.s):
                raise DimensionMismatch(f"environment {e}: theta has shape {env.theta.shape}, expected ({self.q}, {self.s})")
            if env.eta.shape != (self.s,):
                raise DimensionMismatch(f"environment {e}: eta must have length s={self.s}")
            if env.sigma_x1.shape != (self.p,):
                raise DimensionMismatch(f"environment {e}: sigma_x1 must have length p={self.p}")

    @property
    def d(self) -> int:
        return self.p + self.q

    @property
    def n_envs(self) -> int:
        return len(self.envs)

    def env(self, index: int) -> EnvParams:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < len(self.envs):
            raise InvalidEnvIndex(f"environment index {index} out of range [0, {len(self.envs)})")
        return self.envs[index]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "s": self.s,
            "gamma": self.gamma.tolist(),
            "envs": [e.to_dict() for e in self.envs],
            "assumption_flags": dict(self.assumption_flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SemConfig":
        envs = []
        for e in data["envs"]:
            theta = np.array(e["theta"], dtype=float).reshape(data["q"], data["s"])
            envs.append(EnvParams(
                alpha=e["alpha"], theta=theta, eta=e["eta"], sigma_eps=e["sigma_eps"],
                sigma_zeta=e["sigma_zeta"], sigma_h=e["sigma_h"], sigma_x1=e["sigma_x1"],
            ))
        return cls(p=int(data["p"]), q=int(data["q"]), s=int(data["s"]), gamma=data["gamma"],
                   envs=tuple(envs), assumption_flags=dict(data.get("assumption_flags", {})))


@dataclass(frozen=True)
class EnvSample:
    env_index: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise DimensionMismatch(f"sample shapes x={x.shape}, y={y.shape} are inconsistent")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]


def sample_environment(cfg: SemConfig, env: int, n: int, seed: int) -> EnvSample:
    """Draw ``n`` i.i.d. rows from environment ``env``.

    The random stream is derived from ``(seed, env)`` only, so environments
    can be sampled independently and in any order.
    """
    params = cfg.env(env)
    if n < 1:
        raise ClrgError(f"sample size must be at least 1, got {n}")
    rng = np.random.default_rng([int(seed), int(env), _TAG_SAMPLES])
    x1 = rng.standard_normal((n, cfg.p)) * params.sigma_x1
    h = rng.standard_normal((n, cfg.s)) * params.sigma_h
    eps = rng.standard_normal(n) * params.sigma_eps
    zeta = rng.standard_normal((n, cfg.q)) * params.sigma_zeta
    y = x1 @ cfg.gamma + h @ params.eta + eps
    x2 = np.outer(y, params.alpha) + h @ params.theta.T + zeta
    return EnvSample(env_index=env, x=np.hstack([x1, x2]), y=y)


def sample_all(cfg: SemConfig, n: int, seed: int) -> list[EnvSample]:
    return [sample_environment(cfg, e, n, seed) for e in range(cfg.n_envs)]


def preset(setting: str, p: int, q: int, seed: int, *, independent_envs: bool = False,
           sigma_x1: float = 1.0) -> SemConfig:
    """Two-environment configuration for one of the four benchmark settings.

    ``F`` settings have no confounding (``Theta = eta = 0``); ``P`` settings
    draw ``Theta`` and ``eta`` with ``s = q``.  ``HOM`` varies the label noise
    across environments, ``HET`` the spurious-feature noise.  The confounder
    scale is 0.2 in environment 1 and 2.0 in environment 2.

    By default ``alpha``, ``Theta`` and ``eta`` are drawn once and shared by
    both environments, so the environments differ only in their noise
    scales.  ``independent_envs=True`` redraws them per environment.
    """
    setting = setting.upper()
    if setting not in SETTINGS:
        raise ClrgError(f"unknown setting {setting!r}; expected one of {', '.join(SETTINGS)}")
    if p < 1 or q < 1:
        raise ClrgError(f"presets need p >= 1 and q >= 1, got p={p}, q={q}")
    partial = setting.startswith("P")
    hom = setting.endswith("HOM")
    s = q
    sigma_eps = (0.2, 2.0) if hom else (1.0, 1.0)
    sigma_zeta = (1.0, 1.0) if hom else (0.2, 2.0)
    sigma_h = (0.2, 2.0)

    envs = []
    for e in range(2):
        stream = [int(seed), e if independent_envs else 0, _TAG_PARAMS]
        rng = np.random.default_rng(stream)
        alpha = rng.standard_normal(q)
        if partial:
            theta = rng.standard_normal((q, s))
            eta = rng.standard_normal(s)
        else:
            theta = np.zeros((q, s))
            eta = np.zeros(s)
        envs.append(EnvParams(
            alpha=alpha, theta=theta, eta=eta, sigma_eps=sigma_eps[e],
            sigma_zeta=np.full(q, sigma_zeta[e]), sigma_h=sigma_h[e],
            sigma_x1=np.full(p, sigma_x1),
        ))
    return SemConfig(p=p, q=q, s=s, gamma=np.ones(p), envs=tuple(envs),
                     assumption_flags={"setting": setting, "seed": int(seed),
                                       "independent_envs": bool(independent_envs)})


def spurious_coefficients(theta: np.ndarray, eta: np.ndarray, sigma_zeta: np.ndarray,
                          sigma_h: float = 1.0) -> np.ndarray:
    """Least-squares weights on the spurious block when ``alpha = 0``."""
    theta = np.asarray(theta, dtype=float)
    var_h = sigma_h ** 2
    cov = var_h * theta @ theta.T + np.diag(np.asarray(sigma_zeta, dtype=float) ** 2)
    return solve_spd(cov, var_h * theta @ np.asarray(eta, dtype=float))


def confounder_only_config(p: int, q: int, theta, eta1, eta2, sigma_zeta1, sigma_zeta2,
                           seed: int = 0, *, sigma_eps: float = 1.0, tol: float = 1e-8,
                           flag_tol: float = 1e-9) -> SemConfig:
    """Two environments with no anti-causal edge and a shared orthogonal loading.

    The returned config carries ``assumption_flags["variant_coefficients_differ"]``,
    true when the spurious least-squares coefficients of the two environments
    are not identical.  ``seed`` is recorded for provenance only.
    """
    theta = np.array(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != q or theta.shape[1] != q:
        raise DimensionMismatch(f"theta must be {q}x{q}, got shape {theta.shape}")
    dev = np.max(np.abs(theta @ theta.T - np.eye(q))) if q else 0.0
    if dev > tol:
        raise NotOrthogonal(f"theta is not orthogonal: max |Theta Theta^T - I| = {dev:.3e} > {tol:g}")
    w1 = spurious_coefficients(theta, eta1, sigma_zeta1)
    w2 = spurious_coefficients(theta, eta2, sigma_zeta2)
    differ = bool(np.max(np.abs(w1 - w2), initial=0.0) > flag_tol)
    envs = tuple(
        EnvParams(alpha=np.zeros(q), theta=theta, eta=eta, sigma_eps=sigma_eps,
                  sigma_zeta=sz, sigma_h=1.0, sigma_x1=np.ones(p))
        for eta, sz in ((eta1, sigma_zeta1), (eta2, sigma_zeta2))
    )
    return SemConfig(p=p, q=q, s=q, gamma=np.ones(p), envs=envs,
                     assumption_flags={"variant_coefficients_differ": differ, "seed": int(seed)})


def random_orthogonal(q: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR with sign correction."""
    z = rng.standard_normal((q, q))
    qm, r = np.linalg.qr(z)
    return qm * np.sign(np.diag(r))


def stack_samples(samples: Sequence[EnvSample]) -> tuple[np.ndarray, np.ndarray]:
    return np.vstack([s.x for s in samples]), np.concatenate([s.y for s in samples])
