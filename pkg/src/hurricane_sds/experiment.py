"""Canonical desk-scale experiments used by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .sampler import sample_pool_sds, sample_pool_smc
from .toycases import CaseBundle
from .ucmodel import UcInstance, evaluate_plan, severity, solve_instance

log = logging.getLogger(__name__)

PLAN_LABELS = ("worst_sds", "random_sds", "worst_smc")


@dataclass
class PoolPair:
    sds: object
    smc: object


def sample_pair(bundle: CaseBundle, n=None, seed=None, workers=1) -> PoolPair:
    cfg = bundle.config
    n = cfg.n_pool if n is None else n
    seed = cfg.seed if seed is None else seed
    kw = dict(p_threshold=cfg.p_threshold, workers=workers)
    return PoolPair(
        sample_pool_sds(bundle.grid, bundle.track, n, seed, **kw),
        sample_pool_smc(bundle.grid, bundle.track, n, seed, **kw),
    )


def instance_for(bundle: CaseBundle, pool, selection) -> UcInstance:
    scen = [pool.scenario(i) for i in selection.scenario_ids]
    return UcInstance(bundle.grid, scen, selection.weights, reserve_frac=bundle.config.reserve_frac)


@dataclass
class TradeoffResult:
    test_ids: list
    test_q: list  # exact severity per test scenario
    test_qhat: list
    totals: dict  # plan label -> list of total cost per test scenario
    tables: dict  # plan label -> expected cost table
    plans: dict = field(default_factory=dict)
    selections: dict = field(default_factory=dict)

    def ranked(self):
        """Test positions ordered from least to most severe by exact q."""
        return list(np.lexsort((self.test_ids, self.test_q)))

    def checks(self) -> dict:
        order = self.ranked()
        top, bottom = order[-2:], order[:2]
        w, r, m = (self.totals[k] for k in PLAN_LABELS)
        tol = 1e-6
        return {
            "worst_sds_le_random_on_top2": all(w[i] <= r[i] * (1 + tol) for i in top),
            "worst_sds_ge_random_on_bottom2": all(w[i] >= r[i] * (1 - tol) for i in bottom),
            "worst_smc_fails_top2": any(m[i] > w[i] * (1 + tol) for i in top),
        }


def preventive_tradeoff(bundle: CaseBundle, pools: PoolPair = None, n_select=10, seed=None, backend="highs", gap=None):
    """Plans from 10-worst SDS, 10-random SDS and 10-worst SMC, evaluated on a decile test set."""
    cfg = bundle.config
    seed = cfg.seed if seed is None else seed
    gap = cfg.mip_gap if gap is None else gap
    pools = pools or sample_pair(bundle, seed=seed)
    grid = bundle.grid
    q_sds = analysis.proxy_severity(pools.sds)
    test_ids = analysis.decile_test_set(q_sds, seed)
    tests = [pools.sds.scenario(i) for i in test_ids]
    q_exact = [severity(s, grid, gap=1e-6, backend=backend, reserve_frac=cfg.reserve_frac) for s in tests]
    selections = {
        "worst_sds": analysis.select_from_pool(pools.sds, "worst", n_select, seed),
        "random_sds": analysis.select_from_pool(pools.sds, "random", n_select, seed),
        "worst_smc": analysis.select_from_pool(pools.smc, "worst", n_select, seed),
    }
    source = {"worst_sds": pools.sds, "random_sds": pools.sds, "worst_smc": pools.smc}
    plans, totals, tables = {}, {}, {}
    for label in PLAN_LABELS:
        res = solve_instance(instance_for(bundle, source[label], selections[label]), gap, cfg.time_limit, backend)
        plans[label] = res.plan
        results, table = evaluate_plan(res.plan, grid, tests, backend=backend, reserve_frac=cfg.reserve_frac)
        totals[label] = [d.costs["total"] for d in results]
        tables[label] = table
        log.info("%s plan: expected test cost %.1f", label, table["total"])
    return TradeoffResult(
        test_ids=test_ids,
        test_q=q_exact,
        test_qhat=[float(q_sds[i]) for i in test_ids],
        totals=totals,
        tables=tables,
        plans=plans,
        selections=selections,
    )


def tail_comparison(pools: PoolPair, t: int, k_frac=analysis.HILL_K_FRAC, shift=analysis.HILL_SHIFT) -> dict:
    a = pools.sds.faulted_counts()[:, t]
    b = pools.smc.faulted_counts()[:, t]
    out = {}
    for name, pool_counts in (("sds", a), ("smc", b)):
        out[name] = {
            "hill_alpha": analysis.hill_alpha(pool_counts, k_frac, shift),
            "excess_kurtosis": analysis.excess_kurtosis(pool_counts),
            "mmr": analysis.mean_median_ratio(pool_counts),
            "mean": float(pool_counts.mean()),
            "max": int(pool_counts.max()),
        }
    s, m = out["sds"], out["smc"]
    out["hill_heavier"] = bool(s["hill_alpha"] < m["hill_alpha"])
    out["kurtosis_heavier"] = bool(s["excess_kurtosis"] > m["excess_kurtosis"] + 0.5)
    out["mmr_heavier"] = bool(s["mmr"] > m["mmr"])
    out["max_ge"] = bool(s["max"] >= m["max"])
    return out


__all__ = [
    "PLAN_LABELS",
    "PoolPair",
    "TradeoffResult",
    "instance_for",
    "preventive_tradeoff",
    "sample_pair",
    "tail_comparison",
]
