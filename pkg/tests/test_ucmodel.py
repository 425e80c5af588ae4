import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurricane_sds.errors import DataError, InfeasibleError, InvariantError, ShapeError, SolverError
from hurricane_sds.grid import Bus, Generator, GridCase, Line
from hurricane_sds.sampler import Scenario
from hurricane_sds.ucmodel import (
    UcInstance,
    brute_force,
    build_suc,
    dispatch_fixed,
    evaluate_plan,
    expected_counts,
    read_mps,
    severity,
    solve,
    solve_instance,
)
from hurricane_sds.ucmodel.oracle import MAX_BINARIES, commitment_ok, derive_start_stop

from uc_cases import micro2_long, oracle_instances, seg, tri3


def one_bus(demand=50.0, cost=10.0, lc=100.0, pmax=80.0, pmin=0.0, T=1, startup=0.0):
    bus = Bus("A", (demand,) * T, (lc,) * T)
    gen = Generator("G", "A", cost, startup, 0.0, pmax, pmin, pmax, pmax)
    return GridCase("one", (bus,), (gen,), (), T, "A")


# --- builder ---------------------------------------------------------------------


def test_single_bus_no_flows_and_commit_choice():
    g = one_bus()
    m = build_suc(UcInstance.single(g))
    assert not any(n.startswith("pL[") for n in m.var_names)
    res = solve(m, backend="scipy")
    assert res.plan.u[0, 0] == 1
    assert res.objective == pytest.approx(500.0)
    g2 = one_bus(cost=10.0, lc=5.0)
    res2 = solve_instance(UcInstance.single(g2), backend="scipy")
    assert res2.plan.u[0, 0] == 0
    assert res2.objective == pytest.approx(250.0)


@pytest.mark.parametrize("label,inst", oracle_instances())
def test_counts_match_closed_form(label, inst):
    m = build_suc(inst)
    assert (m.n_vars, m.n_rows) == expected_counts(inst)
    r = build_suc(replace(inst, reserve_frac=0.1))
    assert (r.n_vars, r.n_rows) == expected_counts(replace(inst, reserve_frac=0.1))


def test_hand_count_micro2():
    # G=2, N=2, L=1, T=3, S=1: vars 18 + (12 + 18) + 3 = 51
    # rows 24 + (12 + 18 + 8) + 3 = 65
    from uc_cases import micro2_instances

    inst = micro2_instances()[0][1]
    m = build_suc(inst)
    assert (m.n_vars, m.n_rows) == (51, 65)


def test_failed_cells_absent():
    inst = tri3()
    m = build_suc(inst)
    assert "pL[1,BC,0]" in m.index
    assert "pL[1,BC,1]" not in m.index and "pL[1,BC,3]" not in m.index
    assert "pL[2,AB,0]" not in m.index
    assert not any(n.startswith("dcflow[1,AC,2") for n in m.row_names)


def test_instance_validation(micro2):
    g = micro2.grid
    with pytest.raises(DataError):
        UcInstance(g, (Scenario(0),), (0.5,))
    with pytest.raises(ShapeError):
        UcInstance(g, (Scenario(0),), (0.5, 0.5))
    with pytest.raises(DataError):
        UcInstance(g, (Scenario(0), Scenario(0)), (0.5, 0.5))
    with pytest.raises(DataError):
        UcInstance.single(g, Scenario.from_times(0, {"nope": 1}))


def test_structural_infeasibility_detected():
    T = 1
    a = Bus("A", (0.0,), (math.inf,))
    b = Bus("B", (10.0,), (math.inf,))
    gen = Generator("G", "A", 1.0, 0.0, 0.0, 50.0, 0.0, 50.0, 50.0)
    grid = GridCase("x", (a, b), (gen,), (Line("AB", "A", "B", 0.1, 50.0, seg("AB")),), T, "A")
    with pytest.raises(DataError):
        build_suc(UcInstance.single(grid, Scenario.from_times(0, {"AB": 0})))


def test_mps_round_trip_and_determinism():
    inst = tri3()
    a = build_suc(inst).to_mps()
    assert a == build_suc(inst).to_mps()
    back = read_mps(a)
    assert back.to_mps() == a
    assert "INTORG" in a and "uG[GA,0]" in a


# --- solve vs oracle ----------------------------------------------------------------


_ORACLE = {}


def oracle_objective(label, inst):
    if label not in _ORACLE:
        _ORACLE[label] = brute_force(inst)[0]
    return _ORACLE[label]


@pytest.mark.parametrize("label,inst", oracle_instances())
@pytest.mark.parametrize("backend", ["highs", "scipy"])
def test_matches_oracle(label, inst, backend):
    obj = oracle_objective(label, inst)
    res = solve_instance(inst, gap=1e-9, backend=backend)
    assert res.objective == pytest.approx(obj, rel=1e-6)
    res.plan.check(inst.grid)
    assert max(d.balance_residual for d in res.dispatch) <= 1e-6


@pytest.mark.parametrize("label,inst", oracle_instances()[:3])
def test_oracle_backend_solution_is_feasible(label, inst):
    res = solve_instance(inst, backend="oracle")
    assert res.status == "optimal"
    assert res.objective == pytest.approx(oracle_objective(label, inst), rel=1e-12)
    res.plan.check(inst.grid)


def test_oracle_limit():
    inst = micro2_long()
    big = replace(inst, grid=replace(inst.grid, horizon=7, buses=tuple(replace(b, demand=b.demand + (0.0,), lc_cost=b.lc_cost + (1000.0,)) for b in inst.grid.buses)))
    assert len(big.grid.generators) * big.grid.horizon > MAX_BINARIES
    with pytest.raises(SolverError):
        brute_force(big)


def test_start_stop_helpers():
    u = np.array([[1, 1, 0, 0, 1]])
    y, z = derive_start_stop(u, np.array([0]))
    assert y.tolist() == [[1, 0, 0, 0, 1]] and z.tolist() == [[0, 0, 1, 0, 0]]
    assert commitment_ok(u, y, z, [2], [2])
    assert not commitment_ok(u, y, z, [3], [1])


def test_scenario_order_does_not_change_first_stage():
    inst = tri3()
    rev = UcInstance(inst.grid, inst.scenarios[::-1], inst.weights[::-1])
    a = solve_instance(inst, gap=1e-9)
    b = solve_instance(rev, gap=1e-9)
    assert a.plan.first_stage_cost(inst.grid) == pytest.approx(b.plan.first_stage_cost(inst.grid))
    assert a.objective == pytest.approx(b.objective, rel=1e-9)


def test_infinite_lc_means_no_curtailment():
    g = one_bus(lc=math.inf)
    res = solve_instance(UcInstance.single(g), backend="scipy")
    assert res.dispatch[0].costs["LC"] == 0.0
    assert np.all(res.dispatch[0].dpD == 0)


def test_infeasible_reports_class():
    g = one_bus(lc=math.inf, pmax=10.0)
    with pytest.raises(InfeasibleError) as exc:
        solve_instance(UcInstance.single(g), backend="highs")
    assert exc.value.constraint_class in ("dem", "bal", "pmax")


def test_isolated_load_bus_fully_curtailed():
    T = 3
    a = Bus("A", (0.0,) * T, (500.0,) * T)
    b = Bus("B", (30.0,) * T, (500.0,) * T)
    gen = Generator("G", "A", 10.0, 0.0, 0.0, 100.0, 0.0, 100.0, 100.0)
    grid = GridCase("iso", (a, b), (gen,), (Line("AB", "A", "B", 0.1, 100.0, seg("AB")),), T, "A")
    res = solve_instance(UcInstance.single(grid, Scenario.from_times(0, {"AB": 0})), backend="scipy")
    d = res.dispatch[0]
    assert np.allclose(d.dpD[1], 30.0)
    assert d.costs["LC"] >= 500.0 * 90.0 - 1e-6


def test_severity_properties(ring6):
    g = ring6.grid
    q0 = severity(Scenario(0), g)
    q1 = severity(Scenario.from_times(1, {"L23": 1}), g)
    q2 = severity(Scenario.from_times(2, {"L23": 1, "L34": 1}), g)
    assert q0 <= q1 + 1e-6 <= q2 + 2e-6
    det = solve_instance(UcInstance.single(g), gap=1e-6).objective
    assert q0 == pytest.approx(det, rel=1e-9)
    # bus B3 isolated from t=1: curtailment of its remaining demand is forced
    b3 = next(b for b in g.buses if b.id == "B3")
    assert q2 >= b3.lc_cost[1] * sum(b3.demand[1:]) - 1e-6


# --- plans and dispatch ---------------------------------------------------------------


def test_plan_check_catches_violations():
    inst = tri3()
    plan = solve_instance(inst, gap=1e-9).plan
    bad = replace(plan, y=plan.y.copy())
    bad.y[0, 0] = 1 - bad.y[0, 0]
    with pytest.raises(InvariantError):
        bad.check(inst.grid)


def test_redispatch_reproduces_cost():
    inst = tri3()
    res = solve_instance(inst, gap=1e-9)
    for s, d in zip(inst.scenarios, res.dispatch):
        again = dispatch_fixed(res.plan, s, inst.grid)
        assert again.costs["total"] == pytest.approx(d.costs["total"], rel=1e-6)


def test_forced_overgeneration():
    T = 1
    bus = Bus("A", (10.0,), (1000.0,))
    gens = (
        Generator("G1", "A", 10.0, 0.0, 0.0, 50.0, 30.0, 50.0, 50.0, og_cost=7.0),
        Generator("G2", "A", 10.0, 0.0, 0.0, 50.0, 30.0, 50.0, 50.0, og_cost=7.0),
    )
    grid = GridCase("og", (bus,), gens, (), T, "A")
    res = solve_instance(UcInstance.single(grid), backend="scipy")
    plan = replace(res.plan, u=np.ones((2, 1), int), y=np.ones((2, 1), int), z=np.zeros((2, 1), int))
    d = dispatch_fixed(plan, Scenario(0), grid)
    assert d.costs["OG"] > 0


def test_mild_plan_worse_on_severe(ring6):
    g = ring6.grid
    severe = Scenario.from_times(9, {"L23": 1, "L34": 1})
    mild_plan = solve_instance(UcInstance.single(g), gap=1e-6).plan
    severe_plan = solve_instance(UcInstance.single(g, severe), gap=1e-6).plan
    a = dispatch_fixed(mild_plan, severe, g)
    b = dispatch_fixed(severe_plan, severe, g)
    assert a.costs["LC"] >= b.costs["LC"] - 1e-6


def test_evaluate_plan_tables():
    inst = tri3()
    plan = solve_instance(inst, gap=1e-9).plan
    results, table = evaluate_plan(plan, inst.grid, inst.scenarios[:1])
    assert table == pytest.approx(results[0].costs)
    results, table = evaluate_plan(plan, inst.grid, inst.scenarios)
    assert table["total"] == pytest.approx(np.mean([r.costs["total"] for r in results]))
    for r in results:
        assert np.allclose(r.pD + r.dpD, inst.grid.demand_matrix())
        assert np.all(r.dpD >= -1e-9) and np.all(r.dpD <= inst.grid.demand_matrix() + 1e-9)
        assert np.all(r.pG >= -1e-9) and np.all(r.pOG >= -1e-9)


def test_dispatch_rejects_mismatched_plan(ring6):
    plan = solve_instance(tri3(), gap=1e-6).plan
    with pytest.raises(InvariantError):
        dispatch_fixed(plan, Scenario(0), ring6.grid)


def test_reserve_raises_commitment():
    inst = tri3()
    base = solve_instance(inst, gap=1e-9)
    res = solve_instance(replace(inst, reserve_frac=0.5), gap=1e-9)
    assert res.objective >= base.objective - 1e-6
    cap = np.array([g.pmax for g in inst.grid.generators])
    demand = inst.grid.demand_matrix().sum(axis=0)
    for d in res.dispatch:
        spare = (cap[:, None] * res.plan.u - np.nan_to_num(d.pG)).sum(axis=0)
        assert np.all(spare >= 0.5 * demand - 1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 120.0), st.floats(1.0, 50.0), st.floats(10.0, 2000.0))
def test_one_bus_oracle_property(demand, cost, lc):
    g = one_bus(demand=demand, cost=cost, lc=lc, pmax=80.0, T=2, startup=100.0)
    inst = UcInstance.single(g)
    obj, _, _ = brute_force(inst)
    assert solve_instance(inst, gap=1e-9, backend="highs").objective == pytest.approx(obj, rel=1e-6, abs=1e-6)
