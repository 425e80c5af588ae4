"""Lognormal fragility curves and the Bernoulli failure indicator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

# Pearson correlation of a constant margin.
UNDEFINED_CORR = float("nan")

SENSITIVITY_MEANS = (-1.0, 0.0, 1.0)
SENSITIVITY_SIGMAS = tuple(float(s) for s in np.logspace(-1, 2, 7))
SENSITIVITY_RHOS = (-1.0, -2 / 3, -1 / 3, 0.0, 1 / 3, 2 / 3, 1.0)
SENSITIVITY_N = 3000


@dataclass(frozen=True)
class FragilityParams:
    beta: float
    w0: float

    def __post_init__(self):
        if not (self.beta > 0 and self.w0 > 0):
            raise DomainError(f"fragility parameters must be positive: {self}")

    def normalize(self, w):
        """Normalized intensity (ln w - ln w0) / beta."""
        return (np.log(w) - math.log(self.w0)) / self.beta


def fragility_prob(fp: FragilityParams, w: float) -> float:
    if not w > 0:
        raise DomainError(f"intensity must be positive, got {w}")
    return float(ndtr(fp.normalize(w)))


def fragility_prob_array(beta, w0, w) -> np.ndarray:
    """Vectorised fragility; nonpositive intensities map to probability 0."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore"):
        z = (np.log(np.where(w > 0, w, 0.0)) - np.log(w0)) / beta
    return ndtr(z)


def failure_indicator(wstar, r):
    """1 where the uniform draw falls strictly below the fragility value."""
    out = np.asarray(r) < ndtr(wstar)
    return int(out) if out.ndim == 0 else out.astype(np.uint8)


def two_component_corr(mi, mj, si, sj, rho, n, seed) -> float:
    """Monte Carlo Corr(x_i, x_j) for two components with correlated normalized intensities.

    Returns :data:`UNDEFINED_CORR` when either failure indicator is constant.
    """
    if not (si > 0 and sj > 0):
        raise DomainError("normalized standard deviations must be positive")
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho out of range: {rho}")
    if n < 2:
        raise DomainError("need at least two draws")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, n))
    r = rng.random((2, n))
    wi = mi + si * z[0]
    wj = mj + sj * (rho * z[0] + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[1])
    xi = failure_indicator(wi, r[0]).astype(float)
    xj = failure_indicator(wj, r[1]).astype(float)
    if xi.std() == 0.0 or xj.std() == 0.0:
        return UNDEFINED_CORR
    return float(np.corrcoef(xi, xj)[0, 1])


def sensitivity_grid(
    means=SENSITIVITY_MEANS,
    sigmas=SENSITIVITY_SIGMAS,
    rhos=SENSITIVITY_RHOS,
    n=SENSITIVITY_N,
    seed=0,
):
    """Run the two-component experiment over a parameter grid.

    Seeds depend only on the (si, sj, rho) cell, not on the mean pair, so
    surfaces for different mean pairs share random numbers.

    Returns a list of row dicts with keys mi, mj, si, sj, rho, corr, n, seed.
    """
    rows = []
    for mi in means:
        for mj in means:
            for a, si in enumerate(sigmas):
                for b, sj in enumerate(sigmas):
                    for c, rho in enumerate(rhos):
                        cell_seed = seed * 1_000_003 + (a * len(sigmas) + b) * len(rhos) + c
                        corr = two_component_corr(mi, mj, si, sj, rho, n, cell_seed)
                        rows.append(
                            dict(mi=mi, mj=mj, si=si, sj=sj, rho=rho, corr=corr, n=n, seed=cell_seed)
                        )
    return rows


def grid_surface(rows, mi, mj, sigmas=SENSITIVITY_SIGMAS, rhos=SENSITIVITY_RHOS) -> np.ndarray:
    """Correlation surface (si, sj, rho) for one mean pair from :func:`sensitivity_grid` rows."""
    si_idx = {s: k for k, s in enumerate(sigmas)}
    rho_idx = {r: k for k, r in enumerate(rhos)}
    out = np.full((len(sigmas), len(sigmas), len(rhos)), np.nan)
    for row in rows:
        if row["mi"] == mi and row["mj"] == mj:
            out[si_idx[row["si"]], si_idx[row["sj"]], rho_idx[row["rho"]]] = row["corr"]
    return out
