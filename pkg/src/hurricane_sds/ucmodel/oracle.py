"""Exhaustive commitment oracle for tiny instances.

Every commitment matrix u in {0,1}^(G x T) is enumerated; startups and
shutdowns follow from u, minimum up/down times filter the candidates, and
each scenario's dispatch is solved as a separate LP written here from
scratch (it shares no code with :func:`.build.build_suc`).
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from ..errors import SolverError
from .backends import RawSolution
from .build import UcInstance, initial_fixings

MAX_BINARIES = 12


def derive_start_stop(u: np.ndarray, u0: np.ndarray):
    prev = np.concatenate([u0[:, None], u[:, :-1]], axis=1)
    y = np.maximum(u - prev, 0)
    z = np.maximum(prev - u, 0)
    return y, z


def commitment_ok(u, y, z, min_up, min_down) -> bool:
    G, T = u.shape
    for g in range(G):
        for t in range(T):
            if y[g, max(0, t - min_up[g] + 1) : t + 1].sum() > u[g, t]:
                return False
            if z[g, max(0, t - min_down[g] + 1) : t + 1].sum() > 1 - u[g, t]:
                return False
    return True


class _ScenarioLP:
    """Dispatch LP of one scenario with commitment-dependent bounds."""

    def __init__(self, inst: UcInstance, scenario):
        grid = inst.grid
        self.grid, self.scenario, self.inst = grid, scenario, inst
        G, N, T = len(grid.generators), len(grid.buses), grid.horizon
        self.G, self.N, self.T = G, N, T
        bidx = grid.bus_index()
        live = [(k, ln, t) for t in range(T) for k, ln in enumerate(grid.lines) if scenario.in_service(ln.id, t)]
        self.live = live
        # column layout: p (G*T), og (G*T), pd (N*T), dpd (N*T), th (N*T), f (len(live))
        self.o_p, self.o_og = 0, G * T
        self.o_pd, self.o_dpd, self.o_th = 2 * G * T, 2 * G * T + N * T, 2 * G * T + 2 * N * T
        self.o_f = 2 * G * T + 3 * N * T
        nv = self.o_f + len(live)
        self.nv = nv
        gi = lambda g, t: g * T + t  # noqa: E731
        ni = lambda n, t: n * T + t  # noqa: E731
        self.gi, self.ni = gi, ni
        D = grid.demand_matrix()
        c = np.zeros(nv)
        for g, gen in enumerate(grid.generators):
            for t in range(T):
                c[self.o_p + gi(g, t)] = gen.cost
                c[self.o_og + gi(g, t)] = gen.og_cost
        for n, b in enumerate(grid.buses):
            for t in range(T):
                lc = b.lc_cost[t]
                c[self.o_dpd + ni(n, t)] = 0.0 if math.isinf(lc) else lc
        self.c = c
        Aeq, beq = [], []
        for n, b in enumerate(grid.buses):
            for t in range(T):
                row = np.zeros(nv)
                for g, gen in enumerate(grid.generators):
                    if gen.bus == b.id:
                        row[self.o_p + gi(g, t)] += 1.0
                row[self.o_pd + ni(n, t)] -= 1.0
                for j, (k, ln, tt) in enumerate(live):
                    if tt != t:
                        continue
                    if ln.from_bus == b.id:
                        row[self.o_f + j] -= 1.0
                    if ln.to_bus == b.id:
                        row[self.o_f + j] += 1.0
                Aeq.append(row)
                beq.append(0.0)
                row = np.zeros(nv)
                row[self.o_pd + ni(n, t)] = 1.0
                row[self.o_dpd + ni(n, t)] = 1.0
                Aeq.append(row)
                beq.append(D[n, t])
        for j, (k, ln, t) in enumerate(live):
            row = np.zeros(nv)
            row[self.o_f + j] = ln.reactance / grid.base_mva
            row[self.o_th + ni(bidx[ln.from_bus], t)] = -1.0
            row[self.o_th + ni(bidx[ln.to_bus], t)] = 1.0
            Aeq.append(row)
            beq.append(0.0)
        self.Aeq, self.beq = np.array(Aeq), np.array(beq)
        # inequalities: -(p + og) <= -Pmin u ; ramps ; reserve
        Aub = []
        self.pmin_rows = []
        for g in range(G):
            for t in range(T):
                row = np.zeros(nv)
                row[self.o_p + gi(g, t)] = -1.0
                row[self.o_og + gi(g, t)] = -1.0
                self.pmin_rows.append(len(Aub))
                Aub.append(row)
        bub_fixed = [0.0] * len(Aub)
        for g, gen in enumerate(grid.generators):
            for t in range(T):
                if t == 0:
                    if inst.initial_ramp:
                        row = np.zeros(nv)
                        row[self.o_p + gi(g, 0)] = 1.0
                        Aub.append(row)
                        bub_fixed.append(gen.p0 + gen.ramp_up)
                        Aub.append(-row)
                        bub_fixed.append(gen.ramp_down - gen.p0)
                    continue
                row = np.zeros(nv)
                row[self.o_p + gi(g, t)] = 1.0
                row[self.o_p + gi(g, t - 1)] = -1.0
                Aub.append(row)
                bub_fixed.append(gen.ramp_up)
                Aub.append(-row)
                bub_fixed.append(gen.ramp_down)
        self.reserve_rows = []
        if inst.reserve_frac > 0:
            for t in range(T):
                row = np.zeros(nv)
                for g in range(G):
                    row[self.o_p + gi(g, t)] = 1.0
                self.reserve_rows.append(len(Aub))
                Aub.append(row)
                bub_fixed.append(0.0)
        self.Aub = np.array(Aub) if Aub else np.zeros((0, nv))
        self.bub_fixed = np.array(bub_fixed)
        self.D = D

    def solve(self, u: np.ndarray):
        grid, G, N, T = self.grid, self.G, self.N, self.T
        bub = self.bub_fixed.copy()
        bounds = [(0.0, 0.0)] * self.nv
        for g, gen in enumerate(grid.generators):
            for t in range(T):
                bub[self.pmin_rows[g * T + t]] = -gen.pmin * u[g, t]
                bounds[self.o_p + self.gi(g, t)] = (0.0, gen.pmax * u[g, t])
                bounds[self.o_og + self.gi(g, t)] = (0.0, gen.pmin * u[g, t])
        for r, t in zip(self.reserve_rows, range(T)):
            cap = sum(gen.pmax * u[g, t] for g, gen in enumerate(grid.generators))
            bub[r] = cap - self.inst.reserve_frac * self.D[:, t].sum()
        for n, b in enumerate(grid.buses):
            for t in range(T):
                d = self.D[n, t]
                bounds[self.o_pd + self.ni(n, t)] = (0.0, d)
                bounds[self.o_dpd + self.ni(n, t)] = (0.0, 0.0 if math.isinf(b.lc_cost[t]) else d)
                if b.id == grid.slack_bus:
                    bounds[self.o_th + self.ni(n, t)] = (0.0, 0.0)
                else:
                    bounds[self.o_th + self.ni(n, t)] = (math.radians(b.theta_min_deg), math.radians(b.theta_max_deg))
        for j, (k, ln, t) in enumerate(self.live):
            bounds[self.o_f + j] = (-ln.flow_limit, ln.flow_limit)
        res = linprog(
            self.c,
            A_ub=self.Aub if self.Aub.shape[0] else None,
            b_ub=bub if self.Aub.shape[0] else None,
            A_eq=self.Aeq,
            b_eq=self.beq,
            bounds=bounds,
            method="highs",
        )
        if res.status != 0:
            return math.inf, None
        return float(res.fun), res.x

    def named_values(self, x) -> dict:
        sid, grid, T = self.scenario.id, self.grid, self.T
        out = {}
        for g, gen in enumerate(grid.generators):
            for t in range(T):
                out[f"pG[{sid},{gen.id},{t}]"] = x[self.o_p + self.gi(g, t)]
                out[f"pOG[{sid},{gen.id},{t}]"] = x[self.o_og + self.gi(g, t)]
        for n, b in enumerate(grid.buses):
            for t in range(T):
                out[f"pD[{sid},{b.id},{t}]"] = x[self.o_pd + self.ni(n, t)]
                out[f"dpD[{sid},{b.id},{t}]"] = x[self.o_dpd + self.ni(n, t)]
                out[f"thN[{sid},{b.id},{t}]"] = x[self.o_th + self.ni(n, t)]
        for j, (k, ln, t) in enumerate(self.live):
            out[f"pL[{sid},{ln.id},{t}]"] = x[self.o_f + j]
        return out


def brute_force(inst: UcInstance):
    """Return (objective, u, per-scenario named values) of the best commitment."""
    grid = inst.grid
    G, T = len(grid.generators), grid.horizon
    if G * T > MAX_BINARIES:
        raise SolverError(f"oracle limited to {MAX_BINARIES} commitment binaries, instance has {G * T}")
    u0 = np.array([g.u0 for g in grid.generators])
    min_up = [g.min_up for g in grid.generators]
    min_down = [g.min_down for g in grid.generators]
    forced = {}
    for k, g in enumerate(grid.generators):
        for t, v in initial_fixings(g, T).items():
            forced[k, t] = v
        for t in range(T):
            key = f"uG[{g.id},{t}]"
            if key in inst.fixed:
                forced[k, t] = int(round(inst.fixed[key]))
    su = np.array([g.startup_cost for g in grid.generators])
    sd = np.array([g.shutdown_cost for g in grid.generators])
    lps = [_ScenarioLP(inst, s) for s in inst.scenarios]
    best = (math.inf, None, None)
    for bits in itertools.product((0, 1), repeat=G * T):
        u = np.array(bits, dtype=int).reshape(G, T)
        if any(u[k, t] != v for (k, t), v in forced.items()):
            continue
        y, z = derive_start_stop(u, u0)
        if not commitment_ok(u, y, z, min_up, min_down):
            continue
        total = float((su[:, None] * y).sum() + (sd[:, None] * z).sum())
        xs = []
        for lp, w in zip(lps, inst.weights):
            val, x = lp.solve(u)
            total += w * val
            xs.append(x)
            if total >= best[0]:
                break
        if total < best[0] and all(x is not None for x in xs) and len(xs) == len(lps):
            best = (total, u, xs)
    if best[1] is None:
        raise SolverError("oracle found no feasible commitment")
    obj, u, xs = best
    values = {}
    for lp, x in zip(lps, xs):
        values.update(lp.named_values(x))
    return obj, u, values


def brute_force_solution(model) -> RawSolution:
    inst = model.instance
    obj, u, values = brute_force(inst)
    grid = inst.grid
    y, z = derive_start_stop(u, np.array([g.u0 for g in grid.generators]))
    for k, g in enumerate(grid.generators):
        for t in range(grid.horizon):
            values[f"uG[{g.id},{t}]"] = u[k, t]
            values[f"yG[{g.id},{t}]"] = y[k, t]
            values[f"zG[{g.id},{t}]"] = z[k, t]
    x = np.zeros(model.n_vars)
    for name, v in values.items():
        x[model.index[name]] = v
    return RawSolution(x, obj, "optimal", 0.0, "oracle")
