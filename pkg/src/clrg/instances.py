"""Random problem generators shared by the property suite and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .population import EnvironmentMoments
from .sem import SemConfig, confounder_only_config, random_orthogonal


def random_spd(d: int, rng: np.random.Generator, cond: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues spread over ``[1, cond]``."""
    q = random_orthogonal(d, rng)
    lam = np.exp(rng.uniform(0.0, np.log(cond), d))
    a = (q * lam) @ q.T
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class GameInstance:
    moments: tuple
    stars: tuple
    w_sup: float
    u_set: tuple


def separable_instance(rng: np.random.Generator, d: int, w_sup: float, r: int = 2,
                       n_shared: int = 0, min_gap: float = 0.05, scale: float = 0.9) -> GameInstance:
    """Moments whose least-squares solutions lie in ``scale * w_sup``.

    The first ``n_shared`` components have a common coefficient across
    environments and an arbitrary SPD covariance block; the remaining
    components have diagonal covariance and coefficients whose pairwise
    gaps are at least ``min_gap * w_sup``.
    """
    k = n_shared
    shared = rng.uniform(-scale, scale, k) * w_sup
    while True:
        var = rng.uniform(-scale, scale, (r, d - k)) * w_sup
        if d - k == 0 or r < 2:
            break
        srt = np.sort(var, axis=0)
        if np.min(np.diff(srt, axis=0)) >= min_gap * w_sup:
            break
    moments, stars = [], []
    for e in range(r):
        w = np.concatenate([shared, var[e]])
        sigma = np.zeros((d, d))
        if k:
            sigma[:k, :k] = random_spd(k, rng)
        sigma[k:, k:] = np.diag(rng.uniform(0.5, 2.0, d - k))
        moments.append(EnvironmentMoments(sigma=sigma, rho=sigma @ w, mu=np.zeros(d)))
        stars.append(w)
    return GameInstance(moments=tuple(moments), stars=tuple(stars), w_sup=w_sup, u_set=tuple(range(k)))


def confounder_instance(rng: np.random.Generator, p: int, q: int, opposite: bool = False,
                        identity: bool = False) -> SemConfig:
    """Confounder-only configuration with a random (or identity) orthogonal loading."""
    theta = np.eye(q) if identity else random_orthogonal(q, rng)
    eta1 = rng.standard_normal(q)
    if opposite:
        # Theta eta_2 = -c * Theta eta_1 with c > 0 flips every sign.
        eta2 = theta.T @ (-rng.uniform(0.2, 2.0, q) * (theta @ eta1))
    else:
        eta2 = rng.standard_normal(q)
    sz1 = rng.uniform(0.3, 2.0, q)
    sz2 = rng.uniform(0.3, 2.0, q)
    return confounder_only_config(p, q, theta, eta1, eta2, sz1, sz2)
