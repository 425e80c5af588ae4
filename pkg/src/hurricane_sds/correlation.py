"""Intensity covariance from forecast-parameter uncertainty, and its factorization.

The log-intensity covariance at one timestep is a sum of rank-1 terms,
one per uncertain storm parameter, so it is kept in factored form and the
Cholesky factor is built by successive rank-1 updates in O(N^2 K).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import scipy.io

from .errors import FactorizationError, ShapeError

RIDGE_REL = 1e-10


@dataclass(frozen=True)
class SensitivityVector:
    """Relative sensitivity of log-intensity to one parameter at one timestep."""

    entries: np.ndarray
    param_index: int
    timestep: int = 0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 1 or not np.all(np.isfinite(e)):
            raise ShapeError("sensitivity entries must be a finite 1-d vector")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class CovarianceFactors:
    """C = F F^T with F of shape (dim, K); the dense C is never stored."""

    factors: np.ndarray

    def __post_init__(self):
        f = np.array(self.factors, dtype=float, copy=True)
        if f.ndim != 2:
            raise ShapeError("factors must be a (dim, K) array")
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)

    @property
    def dim(self) -> int:
        return self.factors.shape[0]

    def diag(self) -> np.ndarray:
        return np.einsum("ik,ik->i", self.factors, self.factors)

    def dense(self) -> np.ndarray:
        return self.factors @ self.factors.T

    def correlation(self) -> np.ndarray:
        c = self.dense()
        s = np.sqrt(np.diag(c))
        with np.errstate(divide="ignore", invalid="ignore"):
            return c / np.outer(s, s)

    def ridge(self) -> float:
        d = self.diag()
        return RIDGE_REL * (1.0 + (float(d.max()) if d.size else 0.0))


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray
    eps: float

    @property
    def dim(self) -> int:
        return self.L.shape[0]


def build_covariance(sens, sigma=None, param_cov=None) -> CovarianceFactors:
    """Scale sensitivity vectors into covariance factors.

    ``sens`` is a list of :class:`SensitivityVector` (or a (dim, K) array).
    With ``sigma`` (length K) parameters are independent; with ``param_cov``
    (K x K, PSD) cross-parameter covariances are honoured instead.
    """
    if isinstance(sens, np.ndarray):
        V = np.asarray(sens, dtype=float)
    else:
        if not sens:
            raise ShapeError("need at least one sensitivity vector")
        lengths = {v.entries.shape[0] for v in sens}
        steps = {v.timestep for v in sens}
        if len(lengths) != 1 or len(steps) != 1:
            raise ShapeError("sensitivity vectors differ in length or timestep")
        V = np.column_stack([v.entries for v in sens])
    if V.ndim != 2:
        raise ShapeError("sensitivities must form a (dim, K) matrix")
    K = V.shape[1]
    if (sigma is None) == (param_cov is None):
        raise ValueError("give exactly one of sigma or param_cov")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (K,):
            raise ShapeError(f"sigma has length {sigma.shape}, expected {K}")
        return CovarianceFactors(V * sigma)
    cov = np.asarray(param_cov, dtype=float)
    if cov.shape != (K, K):
        raise ShapeError(f"param_cov has shape {cov.shape}, expected {(K, K)}")
    w, Q = np.linalg.eigh((cov + cov.T) / 2)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ShapeError("parameter covariance is not positive semi-definite")
    return CovarianceFactors(V @ (Q * np.sqrt(np.clip(w, 0.0, None))))


@numba.njit(cache=True)
def _rank1_updates(U, F):
    # U is upper triangular (L^T) so row slices are contiguous. Row k takes
    # all K updates while it is hot in cache; the arithmetic is the same as
    # K full sweeps done one after another.
    n = U.shape[0]
    K = F.shape[1]
    X = np.empty((K, n))
    for j in range(K):
        for i in range(n):
            X[j, i] = F[i, j]
    for k in range(n):
        for j in range(K):
            d = U[k, k]
            xk = X[j, k]
            if xk == 0.0:
                continue
            r = np.sqrt(d * d + xk * xk)
            c = r / d
            s = xk / d
            U[k, k] = r
            for i in range(k + 1, n):
                u = (U[k, i] + s * X[j, i]) / c
                U[k, i] = u
                X[j, i] = c * X[j, i] - s * u
    return U


def cholesky_rank1(cf: CovarianceFactors) -> CholeskyFactor:
    """Lower Cholesky factor of C + eps*I via K rank-1 updates of sqrt(eps)*I."""
    n = cf.dim
    if n < 1:
        raise ShapeError("empty covariance")
    eps = cf.ridge()
    U = np.eye(n) * np.sqrt(eps)
    _rank1_updates(U, np.ascontiguousarray(cf.factors))
    d = np.diag(U)
    if not np.all(np.isfinite(U)) or np.any(d <= 0):
        raise FactorizationError("rank-1 update produced a non-positive pivot")
    return CholeskyFactor(np.ascontiguousarray(U.T), eps)


def correlated_transform(chol: CholeskyFactor, means, z) -> np.ndarray:
    """means + L z for a batch of standard-normal rows ``z`` (n, dim)."""
    return np.asarray(means, dtype=float) + np.asarray(z) @ chol.L.T


def correlated_normal_draws(chol: CholeskyFactor, means, n, seed) -> np.ndarray:
    """``n`` joint normal draws (rows) of log-intensity with mean ``means``."""
    means = np.asarray(means, dtype=float)
    if means.shape != (chol.dim,):
        raise ShapeError("means length does not match factor dimension")
    z = np.random.default_rng(seed).standard_normal((n, chol.dim))
    return correlated_transform(chol, means, z)


def dump_debug(cf: CovarianceFactors, chol: CholeskyFactor, prefix) -> tuple:
    """Write dense C and L in Matrix Market text for external cross-checks."""
    prefix = Path(prefix)
    c_path = prefix.with_name(prefix.name + "_C.mtx")
    l_path = prefix.with_name(prefix.name + "_L.mtx")
    scipy.io.mmwrite(str(c_path), cf.dense(), symmetry="symmetric")
    scipy.io.mmwrite(str(l_path), chol.L)
    return c_path, l_path
