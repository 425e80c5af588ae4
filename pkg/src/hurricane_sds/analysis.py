"""Pool statistics, tail metrics, proxy severity and weighted scenario selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError
from .sampler import ScenarioPool

log = logging.getLogger(__name__)

NOT_ESTIMABLE = float("nan")
HILL_K_FRAC = 0.05
HILL_SHIFT = 1.0
HILL_MIN_TAIL = 20
RULES = ("random", "stratified", "worst")
N_STRATA = 10


# --- tail metrics -------------------------------------------------------------------


def hill_alpha(samples, k_frac: float = HILL_K_FRAC, shift: float = HILL_SHIFT) -> float:
    """Hill tail index on the top ``ceil(k_frac * n)`` order statistics.

    alpha = k / sum_{i=1..k} ln(X_(n-i+1) / X_(n-k)) on ``samples + shift``.
    Returns NaN when fewer than 20 samples lie strictly above X_(n-k).
    """
    x = np.sort(np.asarray(samples, dtype=float) + shift)
    n = x.size
    if n < 2 or not 0 < k_frac < 1:
        return NOT_ESTIMABLE
    k = min(math.ceil(k_frac * n), n - 1)
    thr = x[n - k - 1]
    if thr <= 0 or np.count_nonzero(x > thr) < HILL_MIN_TAIL:
        return NOT_ESTIMABLE
    s = np.log(x[n - k :] / thr).sum()
    return float(k / s) if s > 0 else NOT_ESTIMABLE


def excess_kurtosis(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 4 or np.ptp(x) == 0:
        return NOT_ESTIMABLE
    return float(stats.kurtosis(x, fisher=True, bias=True))


def mean_median_ratio(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return NOT_ESTIMABLE
    med = float(np.median(x))
    if med <= 0:
        return NOT_ESTIMABLE
    return float(x.mean() / med)


@dataclass(frozen=True)
class TailReport:
    """Per-timestep tail metrics of the faulted-line count."""

    label: str
    hill_alpha: tuple
    excess_kurtosis: tuple
    mmr: tuple
    mean: tuple
    median: tuple
    max: tuple

    def rows(self):
        for t in range(len(self.mean)):
            yield {
                "label": self.label,
                "t": t,
                "hill_alpha": self.hill_alpha[t],
                "excess_kurtosis": self.excess_kurtosis[t],
                "mmr": self.mmr[t],
                "mean": self.mean[t],
                "median": self.median[t],
                "max": self.max[t],
            }


def tail_report(pool: ScenarioPool, label: str = "", k_frac=HILL_K_FRAC, shift=HILL_SHIFT) -> TailReport:
    counts = pool.faulted_counts()
    cols = [counts[:, t] for t in range(pool.horizon)]
    return TailReport(
        label=label or pool.sampler_kind,
        hill_alpha=tuple(hill_alpha(c, k_frac, shift) for c in cols),
        excess_kurtosis=tuple(excess_kurtosis(c) for c in cols),
        mmr=tuple(mean_median_ratio(c) for c in cols),
        mean=tuple(float(c.mean()) for c in cols),
        median=tuple(float(np.median(c)) for c in cols),
        max=tuple(int(c.max(initial=0)) for c in cols),
    )


def faulted_count_distribution(pool: ScenarioPool, t: int) -> dict:
    if not 0 <= t < pool.horizon:
        raise DomainError(f"timestep {t} outside horizon {pool.horizon}")
    counts = pool.faulted_counts()[:, t]
    vals, freq = np.unique(counts, return_counts=True)
    return {int(v): int(f) for v, f in zip(vals, freq)}


def line_failure_frequency(pool: ScenarioPool) -> np.ndarray:
    """(n_lines, T) fraction of scenarios with the line out at t."""
    return 1.0 - pool.line_states().mean(axis=0)


def marginal_agreement(pool_a: ScenarioPool, pool_b: ScenarioPool, n_se: float = 3.0):
    """Fraction of (line, t) cells whose failure frequencies agree within ``n_se`` standard errors.

    The standard error is that of a difference of two binomial proportions
    with the pooled rate; cells where both rates are 0 or 1 agree trivially.
    """
    pa, pb = line_failure_frequency(pool_a), line_failure_frequency(pool_b)
    na, nb = pool_a.n_scenarios, pool_b.n_scenarios
    p = (pa * na + pb * nb) / (na + nb)
    se = np.sqrt(p * (1 - p) * (1 / na + 1 / nb))
    diff = np.abs(pa - pb)
    ok = np.where(se > 0, diff <= n_se * se, diff == 0)
    return float(ok.mean()), diff / np.where(se > 0, se, np.inf)


# --- severity proxies -----------------------------------------------------------------


def proxy_severity(pool: ScenarioPool, weights=None) -> np.ndarray:
    """q-hat per scenario: distinct lines failed at any timestep (optionally weighted per line)."""
    failed = pool.line_fail_time() < pool.horizon
    if weights is None:
        return failed.sum(axis=1).astype(float)
    return failed.astype(float) @ np.asarray(weights, dtype=float)


def scenario_proxy_severity(scenario, weights: dict = None) -> float:
    lines = scenario.failed_lines()
    if weights is None:
        return float(len(lines))
    return float(sum(weights[l] for l in lines))


def peak_timestep(grid, track) -> int:
    """Timestep with the largest expected number of segment failures."""
    from .fragility import fragility_prob_array
    from .sampler import predicted_intensity

    beta = np.array([s.beta for s in grid.segments])
    w0 = np.array([s.w0 for s in grid.segments])
    load = [fragility_prob_array(beta, w0, predicted_intensity(grid, track, t)).sum() for t in range(grid.horizon)]
    return int(np.argmax(load))


# --- selection ------------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedSelection:
    rule: str
    n: int
    scenario_ids: tuple
    weights: tuple
    seed: int = 0
    pool_kind: str = ""

    def __post_init__(self):
        if len(self.scenario_ids) != len(self.weights):
            raise DomainError("one weight per selected scenario")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise DomainError("selection weights must be nonnegative and sum to 1")

    def set_severity(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return float(np.dot(self.weights, q[list(self.scenario_ids)]))


def decile_strata(q, n_strata: int = N_STRATA) -> list:
    """Equal-count strata of scenario indices ordered by (q, index)."""
    q = np.asarray(q)
    order = np.lexsort((np.arange(q.size), q))
    return [s for s in np.array_split(order, n_strata) if s.size]


def _largest_remainder(masses, n, rng) -> np.ndarray:
    quota = np.asarray(masses, dtype=float) * n
    alloc = np.floor(quota).astype(int)
    rem = quota - alloc
    short = n - alloc.sum()
    if short > 0:
        # ties among equal remainders are broken at random
        order = np.lexsort((rng.random(rem.size), -rem))
        alloc[order[:short]] += 1
    return alloc


def select(pool_q, rule: str, n: int, seed: int = 0, ids=None, pool_kind: str = "") -> WeightedSelection:
    """Pick ``n`` scenarios by ``rule`` given per-scenario proxy severities ``pool_q``."""
    q = np.asarray(pool_q, dtype=float)
    size = q.size
    ids = np.arange(size) if ids is None else np.asarray(ids)
    if rule not in RULES:
        raise DomainError(f"unknown rule {rule!r}; choose from {', '.join(RULES)}")
    if n < 1:
        raise DomainError("N must be >= 1")
    if n > size:
        log.warning("N=%d exceeds pool size %d; selecting the whole pool", n, size)
        n = size
    rng = np.random.default_rng(seed)
    if rule == "random":
        pick = np.sort(rng.choice(size, n, replace=False))
        w = np.full(n, 1.0 / n)
    elif rule == "worst":
        order = np.lexsort((ids, -q))
        pick = order[:n]
        w = np.full(n, 1.0 / n)
    else:
        strata = decile_strata(q)
        masses = np.array([s.size for s in strata]) / size
        alloc = _largest_remainder(masses, n, rng)
        pick, w = [], []
        for s, mass, k in zip(strata, masses, alloc):
            if k == 0:
                continue
            chosen = np.sort(rng.choice(s, k, replace=False))
            pick.extend(chosen)
            w.extend([mass / k] * k)
        w = np.array(w)
        # strata left without picks hand their mass to the others proportionally
        w = w / w.sum()
        pick = np.array(pick)
    return WeightedSelection(
        rule=rule,
        n=int(n),
        scenario_ids=tuple(int(ids[i]) for i in pick),
        weights=tuple(float(x) for x in w),
        seed=int(seed),
        pool_kind=pool_kind,
    )


def select_from_pool(pool: ScenarioPool, rule: str, n: int, seed: int = 0, weights=None) -> WeightedSelection:
    return select(proxy_severity(pool, weights), rule, n, seed, pool_kind=pool.sampler_kind)


def decile_test_set(q, seed: int = 0) -> list:
    """One scenario index drawn uniformly from each decile of ``q``, lowest decile first."""
    rng = np.random.default_rng(seed)
    return [int(rng.choice(s)) for s in decile_strata(q)]


def kendall_tau(a, b) -> float:
    return float(stats.kendalltau(a, b).statistic)
