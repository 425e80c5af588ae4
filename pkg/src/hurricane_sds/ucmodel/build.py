"""Extensive-form two-stage unit commitment with scenario line outages.

First stage: commitment ``uG``, startup ``yG`` and shutdown ``zG`` per
(generator, timestep). Second stage, per scenario: DC power flow dispatch
with load curtailment and below-minimum operation as slacks.

Variable names (``s`` is the scenario id, angles in radians)::

    uG[g,t] yG[g,t] zG[g,t]                 binaries
    pG[s,g,t] pOG[s,g,t]                    MW
    pD[s,n,t] dpD[s,n,t] thN[s,n,t]         MW, MW, rad
    pL[s,l,t]                               MW, only while line l is in service
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, ShapeError
from ..grid import GridCase
from ..sampler import Scenario
from .lp import INF, LinearModel


@dataclass(frozen=True)
class UcInstance:
    grid: GridCase
    scenarios: tuple
    weights: tuple
    reserve_frac: float = 0.0
    # apply ramp limits between p0 and the first timestep
    initial_ramp: bool = False
    # commitment fixed by the caller (name -> value); used by dispatch_fixed
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.scenarios) != len(self.weights) or not self.scenarios:
            raise ShapeError("need one weight per scenario and at least one scenario")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise DataError("scenario weights must be nonnegative and sum to 1", "weights")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate scenario ids", "scenarios")
        known = {ln.id for ln in self.grid.lines}
        for s in self.scenarios:
            for lid, t in s.line_fail:
                if lid not in known:
                    raise DataError(f"scenario {s.id} refers to unknown line {lid!r}", "scenarios")
                if t < 0:
                    raise DataError(f"scenario {s.id}: negative failure time", "scenarios")

    @classmethod
    def single(cls, grid, scenario=None, **kw):
        return cls(grid, (scenario or Scenario(0),), (1.0,), **kw)

    @property
    def n_binaries(self) -> int:
        return 3 * len(self.grid.generators) * self.grid.horizon


def initial_fixings(g, horizon) -> dict:
    """Timesteps where ``u`` is forced by the unit's state before t=0."""
    out = {}
    if g.init_hours is None:
        return out
    if g.u0 == 1 and g.init_hours < g.min_up:
        for t in range(min(horizon, g.min_up - g.init_hours)):
            out[t] = 1
    if g.u0 == 0 and g.init_hours < g.min_down:
        for t in range(min(horizon, g.min_down - g.init_hours)):
            out[t] = 0
    return out


def _check_structure(inst: UcInstance):
    grid = inst.grid
    has_gen = {g.bus for g in grid.generators}
    for s in inst.scenarios:
        for t in range(grid.horizon):
            alive = {ln.from_bus for ln in grid.lines if s.in_service(ln.id, t)} | {
                ln.to_bus for ln in grid.lines if s.in_service(ln.id, t)
            }
            for b in grid.buses:
                # an infinite curtailment price means curtailment is not allowed
                if b.demand[t] > 0 and math.isinf(b.lc_cost[t]) and b.id not in has_gen and b.id not in alive:
                    raise DataError(
                        f"bus {b.id!r} has demand at t={t} in scenario {s.id} but no supply and no curtailment",
                        "buses",
                    )


def build_suc(inst: UcInstance, name: str = "suc") -> LinearModel:
    _check_structure(inst)
    grid = inst.grid
    T = grid.horizon
    gens = grid.generators
    buses = grid.buses
    m = LinearModel(name=name)
    m.instance = inst

    # first stage ---------------------------------------------------------
    u, y, z = {}, {}, {}
    for g in gens:
        forced = initial_fixings(g, T)
        for t in range(T):
            lb = ub = None
            if t in forced:
                lb = ub = forced[t]
            key = f"uG[{g.id},{t}]"
            if key in inst.fixed:
                lb = ub = inst.fixed[key]
            u[g.id, t] = m.add_var(key, 0 if lb is None else lb, 1 if ub is None else ub, 0.0, True)
            for store, var, cost in ((y, "yG", g.startup_cost), (z, "zG", g.shutdown_cost)):
                key = f"{var}[{g.id},{t}]"
                v = inst.fixed.get(key)
                store[g.id, t] = m.add_var(key, 0 if v is None else v, 1 if v is None else v, cost, True)
    for g in gens:
        for t in range(T):
            # u_t - u_{t-1} - y_t + z_t = 0
            coefs = {u[g.id, t]: 1.0, y[g.id, t]: -1.0, z[g.id, t]: 1.0}
            rhs = 0.0
            if t > 0:
                coefs[u[g.id, t - 1]] = -1.0
            else:
                rhs = float(g.u0)
            m.add_row(f"startstop[{g.id},{t}]", coefs, rhs, rhs)
        for t in range(T):
            # u_t >= sum of startups in the last min_up steps
            coefs = {u[g.id, t]: 1.0}
            for tau in range(max(0, t - g.min_up + 1), t + 1):
                coefs[y[g.id, tau]] = coefs.get(y[g.id, tau], 0.0) - 1.0
            m.add_row(f"minup[{g.id},{t}]", coefs, 0.0, INF)
        for t in range(T):
            # 1 - u_t >= sum of shutdowns in the last min_down steps
            coefs = {u[g.id, t]: 1.0}
            for tau in range(max(0, t - g.min_down + 1), t + 1):
                coefs[z[g.id, tau]] = coefs.get(z[g.id, tau], 0.0) + 1.0
            m.add_row(f"mindown[{g.id},{t}]", coefs, -INF, 1.0)
        for t in range(T):
            m.add_row(f"excl[{g.id},{t}]", {y[g.id, t]: 1.0, z[g.id, t]: 1.0}, -INF, 1.0)

    # second stage per scenario ------------------------------------------
    demand = grid.demand_matrix()
    gens_at = {b.id: [g for g in gens if g.bus == b.id] for b in buses}
    for s, pi in zip(inst.scenarios, inst.weights):
        sid = s.id
        pG, pOG, pD, dpD, th = {}, {}, {}, {}, {}
        for g in gens:
            for t in range(T):
                pG[g.id, t] = m.add_var(f"pG[{sid},{g.id},{t}]", 0.0, g.pmax, pi * g.cost)
                pOG[g.id, t] = m.add_var(f"pOG[{sid},{g.id},{t}]", 0.0, g.pmin, pi * g.og_cost)
        for k, b in enumerate(buses):
            for t in range(T):
                d = float(demand[k, t])
                lc = b.lc_cost[t]
                pD[b.id, t] = m.add_var(f"pD[{sid},{b.id},{t}]", 0.0, d, 0.0)
                dub = 0.0 if math.isinf(lc) else d
                dpD[b.id, t] = m.add_var(f"dpD[{sid},{b.id},{t}]", 0.0, dub, 0.0 if math.isinf(lc) else pi * lc)
                if b.id == grid.slack_bus:
                    lo = hi = 0.0
                else:
                    lo, hi = math.radians(b.theta_min_deg), math.radians(b.theta_max_deg)
                th[b.id, t] = m.add_var(f"thN[{sid},{b.id},{t}]", lo, hi, 0.0)
        flows = {}
        for ln in grid.lines:
            for t in range(T):
                if s.in_service(ln.id, t):
                    j = m.add_var(f"pL[{sid},{ln.id},{t}]", -ln.flow_limit, ln.flow_limit, 0.0)
                    flows[ln.id, t] = j
                    b = grid.base_mva / ln.reactance
                    m.add_row(
                        f"dcflow[{sid},{ln.id},{t}]",
                        {j: 1.0, th[ln.from_bus, t]: -b, th[ln.to_bus, t]: b},
                        0.0,
                        0.0,
                    )
        for b in buses:
            for t in range(T):
                coefs = {pD[b.id, t]: -1.0}
                for g in gens_at[b.id]:
                    coefs[pG[g.id, t]] = 1.0
                for ln in grid.lines:
                    if (ln.id, t) in flows:
                        if ln.from_bus == b.id:
                            coefs[flows[ln.id, t]] = coefs.get(flows[ln.id, t], 0.0) - 1.0
                        elif ln.to_bus == b.id:
                            coefs[flows[ln.id, t]] = coefs.get(flows[ln.id, t], 0.0) + 1.0
                m.add_row(f"bal[{sid},{b.id},{t}]", coefs, 0.0, 0.0)
        for k, b in enumerate(buses):
            for t in range(T):
                d = float(demand[k, t])
                m.add_row(f"dem[{sid},{b.id},{t}]", {pD[b.id, t]: 1.0, dpD[b.id, t]: 1.0}, d, d)
        for g in gens:
            for t in range(T):
                m.add_row(
                    f"pmin[{sid},{g.id},{t}]",
                    {pG[g.id, t]: 1.0, pOG[g.id, t]: 1.0, u[g.id, t]: -g.pmin},
                    0.0,
                    INF,
                )
                m.add_row(f"pmax[{sid},{g.id},{t}]", {pG[g.id, t]: 1.0, u[g.id, t]: -g.pmax}, -INF, 0.0)
                # below-minimum operation only for committed units
                m.add_row(f"ogate[{sid},{g.id},{t}]", {pOG[g.id, t]: 1.0, u[g.id, t]: -g.pmin}, -INF, 0.0)
            for t in range(T):
                if t == 0:
                    if not inst.initial_ramp:
                        continue
                    m.add_row(f"rampup[{sid},{g.id},0]", {pG[g.id, 0]: 1.0}, -INF, g.p0 + g.ramp_up)
                    m.add_row(f"rampdn[{sid},{g.id},0]", {pG[g.id, 0]: 1.0}, g.p0 - g.ramp_down, INF)
                    continue
                c = {pG[g.id, t]: 1.0, pG[g.id, t - 1]: -1.0}
                m.add_row(f"rampup[{sid},{g.id},{t}]", c, -INF, g.ramp_up)
                m.add_row(f"rampdn[{sid},{g.id},{t}]", c, -g.ramp_down, INF)
        if inst.reserve_frac > 0:
            for t in range(T):
                coefs = {}
                for g in gens:
                    coefs[u[g.id, t]] = g.pmax
                    coefs[pG[g.id, t]] = -1.0
                need = inst.reserve_frac * float(demand[:, t].sum())
                m.add_row(f"reserve[{sid},{t}]", coefs, need, INF)
    return m


def expected_counts(inst: UcInstance) -> tuple:
    """Closed-form (variables, rows) of :func:`build_suc` for ``inst``."""
    grid = inst.grid
    G, N, T, S = len(grid.generators), len(grid.buses), grid.horizon, len(inst.scenarios)
    in_service = sum(s.in_service(ln.id, t) for s in inst.scenarios for ln in grid.lines for t in range(T))
    n_vars = 3 * G * T + S * (2 * G * T + 3 * N * T) + in_service
    ramp_rows = 2 * G * (T if inst.initial_ramp else T - 1)
    n_rows = 4 * G * T + S * (2 * N * T + 3 * G * T + ramp_rows) + in_service
    if inst.reserve_frac > 0:
        n_rows += S * T
    return n_vars, n_rows


def column_block(m: LinearModel, x, prefix: str, sid, ids, T) -> np.ndarray:
    """Gather ``prefix[sid,id,t]`` values into an (len(ids), T) array; NaN when absent."""
    out = np.full((len(ids), T), np.nan)
    head = f"{prefix}[" if sid is None else f"{prefix}[{sid},"
    for k, i in enumerate(ids):
        for t in range(T):
            j = m.index.get(f"{head}{i},{t}]")
            if j is not None:
                out[k, t] = x[j]
    return out
