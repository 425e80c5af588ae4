"""Solving, plan extraction, fixed-commitment dispatch and plan evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasibleError, InvariantError, SolverError
from ..grid import GridCase
from ..sampler import Scenario
from .backends import get_backend
from .build import UcInstance, build_suc, column_block
from .lp import INF, LinearModel

log = logging.getLogger(__name__)

COST_KEYS = ("total", "LC", "SUSD", "OP", "OG")
BALANCE_TOL = 1e-6


@dataclass
class CommitmentPlan:
    generator_ids: tuple
    u: np.ndarray  # (G, T) int
    y: np.ndarray
    z: np.ndarray
    u0: tuple = ()
    objective: float = float("nan")
    gap: float = 0.0
    status: str = "optimal"
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.u.shape[1]

    def first_stage_cost(self, grid: GridCase) -> float:
        gi = {g.id: g for g in grid.generators}
        su = np.array([gi[g].startup_cost for g in self.generator_ids])
        sd = np.array([gi[g].shutdown_cost for g in self.generator_ids])
        return float((su[:, None] * self.y).sum() + (sd[:, None] * self.z).sum())

    def fixings(self) -> dict:
        out = {}
        for k, g in enumerate(self.generator_ids):
            for t in range(self.horizon):
                out[f"uG[{g},{t}]"] = int(self.u[k, t])
                out[f"yG[{g},{t}]"] = int(self.y[k, t])
                out[f"zG[{g},{t}]"] = int(self.z[k, t])
        return out

    def check(self, grid: GridCase):
        """Raise InvariantError unless start/stop identity, exclusivity and min up/down hold."""
        gens = {g.id: g for g in grid.generators}
        for arr in (self.u, self.y, self.z):
            if not np.isin(arr, (0, 1)).all():
                raise InvariantError("commitment variables must be 0/1")
        for k, gid in enumerate(self.generator_ids):
            g = gens[gid]
            u, y, z = self.u[k], self.y[k], self.z[k]
            prev = np.concatenate([[g.u0], u[:-1]])
            if not np.array_equal(u - prev, y - z):
                raise InvariantError(f"{gid}: u_t - u_(t-1) != y_t - z_t")
            if np.any(y * z):
                raise InvariantError(f"{gid}: simultaneous startup and shutdown")
            for t in range(self.horizon):
                if y[max(0, t - g.min_up + 1) : t + 1].sum() > u[t]:
                    raise InvariantError(f"{gid}: minimum up time violated at t={t}")
                if z[max(0, t - g.min_down + 1) : t + 1].sum() > 1 - u[t]:
                    raise InvariantError(f"{gid}: minimum down time violated at t={t}")


@dataclass
class DispatchResult:
    scenario_id: int
    pG: np.ndarray  # (G, T)
    pOG: np.ndarray
    pD: np.ndarray  # (N, T)
    dpD: np.ndarray
    thN: np.ndarray  # radians
    pL: np.ndarray  # (L, T), NaN where the line is out of service
    costs: dict
    balance_residual: float = 0.0


@dataclass
class SolveResult:
    plan: CommitmentPlan
    dispatch: list
    objective: float
    gap: float
    status: str
    backend: str


def _extract_dispatch(m: LinearModel, x, grid: GridCase, scenario: Scenario, plan: CommitmentPlan) -> DispatchResult:
    T = grid.horizon
    sid = scenario.id
    gids = [g.id for g in grid.generators]
    bids = [b.id for b in grid.buses]
    lids = [ln.id for ln in grid.lines]
    pG = column_block(m, x, "pG", sid, gids, T)
    pOG = column_block(m, x, "pOG", sid, gids, T)
    pD = column_block(m, x, "pD", sid, bids, T)
    dpD = column_block(m, x, "dpD", sid, bids, T)
    th = column_block(m, x, "thN", sid, bids, T)
    pL = column_block(m, x, "pL", sid, lids, T)
    cost = np.array([g.cost for g in grid.generators])
    og = np.array([g.og_cost for g in grid.generators])
    lc = np.array([[0.0 if np.isinf(c) else c for c in b.lc_cost] for b in grid.buses])
    costs = {
        "LC": float((lc * dpD).sum()),
        "SUSD": plan.first_stage_cost(grid),
        "OP": float((cost[:, None] * pG).sum()),
        "OG": float((og[:, None] * pOG).sum()),
    }
    costs["total"] = costs["LC"] + costs["SUSD"] + costs["OP"] + costs["OG"]
    # nodal balance check
    bidx = grid.bus_index()
    net = np.zeros((len(bids), T))
    for k, g in enumerate(grid.generators):
        net[bidx[g.bus]] += pG[k]
    flows = np.nan_to_num(pL)
    for k, ln in enumerate(grid.lines):
        net[bidx[ln.from_bus]] -= flows[k]
        net[bidx[ln.to_bus]] += flows[k]
    resid = float(np.abs(net - pD).max())
    return DispatchResult(sid, pG, pOG, pD, dpD, th, pL, costs, resid)


def _plan_from_x(m: LinearModel, x, grid: GridCase) -> CommitmentPlan:
    T = grid.horizon
    gids = [g.id for g in grid.generators]
    u, y, z = (np.rint(column_block(m, x, v, None, gids, T)).astype(int) for v in ("uG", "yG", "zG"))
    return CommitmentPlan(tuple(gids), u, y, z, tuple(g.u0 for g in grid.generators))


def diagnose_infeasibility(m: LinearModel, backend) -> str:
    """Name the first constraint class whose removal restores feasibility."""
    classes = list(dict.fromkeys(m.row_class))
    for cls in classes:
        relaxed = m.copy_with_bounds({})
        relaxed.row_lo = [(-INF if c == cls else lo) for c, lo in zip(m.row_class, m.row_lo)]
        relaxed.row_hi = [(INF if c == cls else hi) for c, hi in zip(m.row_class, m.row_hi)]
        sol = backend.solve(relaxed, 1.0, 60.0)
        if sol.status != "infeasible":
            return cls
    return "bounds"


def solve(model: LinearModel, gap: float = 1e-3, time_limit: float = 600.0, backend="highs") -> SolveResult:
    inst: UcInstance = model.instance
    if inst is None:
        raise SolverError("model was not built by build_suc")
    be = get_backend(backend)
    sol = be.solve(model, gap, time_limit)
    if sol.status == "infeasible":
        cls = diagnose_infeasibility(model, be) if be.name != "oracle" else "unknown"
        raise InfeasibleError(f"model infeasible; violated constraint class: {cls}", cls)
    x = sol.x.copy()
    # snap binaries so plan invariants hold exactly
    ints = np.flatnonzero(model.integer)
    x[ints] = np.rint(x[ints])
    plan = _plan_from_x(model, x, inst.grid)
    plan.objective, plan.gap, plan.status = sol.objective, sol.gap, sol.status
    plan.check(inst.grid)
    viol = model.max_violation(x)
    if viol > 1e-5:
        log.warning("solution violates a constraint by %.3g", viol)
    dispatch = [_extract_dispatch(model, x, inst.grid, s, plan) for s in inst.scenarios]
    worst = max(d.balance_residual for d in dispatch)
    if worst > BALANCE_TOL:
        raise InvariantError(f"balance residual {worst:.3g} MW exceeds {BALANCE_TOL}")
    if sol.status == "time_limit":
        log.warning("time limit reached; best incumbent has relative gap %.3g", sol.gap)
    return SolveResult(plan, dispatch, sol.objective, sol.gap, sol.status, be.name)


def solve_instance(inst: UcInstance, gap=1e-3, time_limit=600.0, backend="highs") -> SolveResult:
    return solve(build_suc(inst), gap, time_limit, backend)


def severity(scenario: Scenario, grid: GridCase, gap=1e-6, time_limit=600.0, backend="highs", **kw) -> float:
    """Optimal objective of the model with this scenario alone at weight 1."""
    return solve_instance(UcInstance.single(grid, scenario, **kw), gap, time_limit, backend).objective


def dispatch_fixed(plan: CommitmentPlan, scenario: Scenario, grid: GridCase, backend="highs", **kw) -> DispatchResult:
    if plan.horizon != grid.horizon:
        raise InvariantError(f"plan covers {plan.horizon} steps, grid horizon is {grid.horizon}")
    if tuple(plan.generator_ids) != tuple(g.id for g in grid.generators):
        raise InvariantError("plan generators do not match the grid")
    inst = UcInstance(grid, (scenario,), (1.0,), fixed=plan.fixings(), **kw)
    m = build_suc(inst, name="dispatch").relaxed()
    be = get_backend("scipy" if backend == "oracle" else backend)
    sol = be.solve(m, 0.0, 600.0)
    if sol.status != "optimal":
        raise InvariantError(f"fixed-commitment dispatch ended with status {sol.status}")
    d = _extract_dispatch(m, sol.x, grid, scenario, plan)
    if d.balance_residual > BALANCE_TOL:
        raise InvariantError(f"balance residual {d.balance_residual:.3g} MW")
    return d


def evaluate_plan(plan: CommitmentPlan, grid: GridCase, scenarios, weights=None, backend="highs", **kw):
    """Per-scenario dispatch results and the weighted mean of each cost category."""
    scenarios = list(scenarios)
    if weights is None:
        weights = np.full(len(scenarios), 1.0 / len(scenarios))
    weights = np.asarray(weights, dtype=float)
    results = [dispatch_fixed(plan, s, grid, backend, **kw) for s in scenarios]
    table = {k: float(sum(w * r.costs[k] for w, r in zip(weights, results))) for k in COST_KEYS}
    return results, table
