"""Dense linear-algebra primitives used throughout the package.

Matrices and vectors are plain float64 numpy arrays.  All functions are pure
and never modify their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import ClrgError, DimensionMismatch, EmptySample, NotPositiveDefinite

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.array(v, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ClrgError(f"{name} has non-finite entries")
    return arr


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ClrgError(f"{name} has non-finite entries")
    return arr


def _check_symmetric(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise ClrgError(f"{name} is not symmetric within {SYMMETRY_TOL:g}")


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``.

    Uses a Cholesky factorization.  A diagonal pivot ``L_ii**2`` at or below
    1e-12 is reported as :class:`NotPositiveDefinite` instead of returning an
    inaccurate solution.
    """
    a = as_matrix(a, "a")
    b = as_vector(b, "b")
    _check_symmetric(a, "a")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, matrix is {a.shape[0]}x{a.shape[1]}")
    sym = 0.5 * (a + a.T)
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "Regularity assumption violated: second-moment matrix is not positive definite"
        ) from exc
    pivots = np.diag(chol) ** 2
    if pivots.size and pivots.min() <= PIVOT_TOL:
        raise NotPositiveDefinite(
            f"Regularity assumption violated: Cholesky pivot {pivots.min():.3e} <= {PIVOT_TOL:g}"
        )
    y = _forward(chol, b)
    return _backward(chol.T, y)


def _forward(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = b.shape[0]
    y = np.empty(n)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    return y


def _backward(upper: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = y.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - upper[i, i + 1:] @ x[i + 1:]) / upper[i, i]
    return x


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    a = as_matrix(a, "a")
    _check_symmetric(a, "a")
    if a.size == 0:
        raise DimensionMismatch("empty matrix has no eigenvalues")
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def empirical_moments(x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uncentered sample moments ``(sigma, rho, mu)``.

    ``sigma = X^T X / n`` (symmetrized), ``rho = X^T y / n``, ``mu`` the
    column means.  The mean is returned so callers can check the zero-mean
    convention the moments rely on.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"samples must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n == 0:
        raise EmptySample("cannot estimate moments from zero samples")
    if y.shape != (n,):
        raise DimensionMismatch(f"labels have shape {y.shape}, expected ({n},)")
    sigma = x.T @ x / n
    sigma = 0.5 * (sigma + sigma.T)
    rho = x.T @ y / n
    mu = x.mean(axis=0)
    return sigma, rho, mu


def clamp_linf(v, w_sup: float) -> np.ndarray:
    """Project onto the box ``{w : |w_i| <= w_sup}``."""
    if not w_sup > 0:
        raise ClrgError(f"w_sup must be positive, got {w_sup}")
    return np.clip(np.asarray(v, dtype=float), -w_sup, w_sup)
