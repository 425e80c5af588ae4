"""Command-line entry point: sample -> analyze -> select -> plan -> evaluate -> report.

Every command that writes an artifact also writes ``<artifact>.manifest.json``
recording the resolved arguments, input hashes, tool version and wall time.
``rerun --manifest F`` replays it and reproduces the artifact byte for byte.

Exit codes: 0 ok, 2 usage, 3 data, 4 solver, 5 internal invariant.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, experiment, fragility, ingest, windfield
from .errors import SdsError
from .sampler import P_THRESHOLD, sample_pool
from .toycases import TOY_NAMES, CaseBundle, make_toy_case
from .ucmodel import BACKENDS, UcInstance, evaluate_plan, solve_instance

log = logging.getLogger("hurricane_sds")

EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_INTERNAL = 2, 3, 4, 5
METHODS = {"sds": "relevance", "smc": "normal"}


class UsageError(Exception):
    pass


# --- helpers -----------------------------------------------------------------------------


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _out_path(args, name) -> Path:
    p = Path(name)
    if args.out_dir and not p.is_absolute():
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _bundle(args) -> CaseBundle:
    if getattr(args, "case", None):
        return make_toy_case(args.case)
    if not (getattr(args, "grid", None) and getattr(args, "track", None)):
        raise UsageError("give --case NAME or both --grid and --track")
    return CaseBundle(ingest.load_grid(args.grid), ingest.load_track(args.track))


def _grid(args):
    if getattr(args, "case", None):
        return make_toy_case(args.case).grid
    if not getattr(args, "grid", None):
        raise UsageError("give --case NAME or --grid F")
    return ingest.load_grid(args.grid)


def _inputs(args) -> list:
    keys = ("grid", "track", "pool", "selection", "plan", "file", "test")
    out = []
    for k in keys:
        v = getattr(args, k, None)
        if v:
            out.append(v)
    out.extend(getattr(args, "compare", None) or [])
    return out


def _write_manifest(args, argv, outputs, seconds):
    inputs = {str(p): _file_hash(p) for p in _inputs(args) if Path(p).is_file()}
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "schema": "hurricane-sds/manifest",
        "version": 1,
        "tool_version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "workers": args.workers,
        "inputs": inputs,
        "outputs": {str(p): _file_hash(p) for p in outputs},
        "wall_seconds": round(seconds, 3),
    }
    for p in outputs:
        Path(str(p) + ".manifest.json").write_text(json.dumps(doc, indent=1, default=str) + "\n")


# --- commands ----------------------------------------------------------------------------


def cmd_sample(args):
    b = _bundle(args)
    p_thr = args.p_threshold if args.p_threshold is not None else b.config.p_threshold
    pool = sample_pool(b.grid, b.track, args.n, args.seed, METHODS[args.method], p_thr, args.workers)
    out = _out_path(args, args.out)
    ingest.save_pool(pool, out)
    print(f"wrote {pool.n_scenarios} {args.method} scenarios ({pool.ev_time.size} failure events) to {out}")
    return [out]


def cmd_analyze(args):
    pool = ingest.load_pool(args.pool)
    rep = analysis.tail_report(pool, k_frac=args.hill_k, shift=args.hill_shift)
    out = _out_path(args, args.out)
    ingest.write_csv(out, rep.rows())
    print(f"wrote tail report for {pool.horizon} timesteps to {out}")
    return [out]


def cmd_select(args):
    pool = ingest.load_pool(args.pool)
    sel = analysis.select_from_pool(pool, args.rule, args.n, args.seed)
    out = _out_path(args, args.out)
    ingest.save_selection(sel, pool, out)
    q = analysis.proxy_severity(pool)
    print(f"selected {sel.n} scenarios ({args.rule}); set severity {sel.set_severity(q):.4g}, pool mean {q.mean():.4g}")
    return [out]


def cmd_plan(args):
    grid = _grid(args)
    sel, scen, horizon = ingest.load_selection(args.selection)
    if horizon != grid.horizon:
        raise ingest.DataError(f"selection horizon {horizon} does not match grid horizon {grid.horizon}", "horizon")
    inst = UcInstance(grid, scen, sel.weights, reserve_frac=args.reserve)
    res = solve_instance(inst, args.gap, args.time_limit, args.backend)
    res.plan.meta = {"rule": sel.rule, "n": sel.n, "pool_kind": sel.pool_kind, "backend": res.backend}
    out = _out_path(args, args.out)
    ingest.save_plan(res.plan, out, grid.digest())
    print(f"plan objective {res.objective:.6g} (status {res.status}, gap {res.gap:.2g}) -> {out}")
    return [out]


def cmd_evaluate(args):
    grid = _grid(args)
    plan = ingest.load_plan(args.plan)
    sel, scen, _ = ingest.load_selection(args.test)
    results, table = evaluate_plan(plan, grid, scen, sel.weights, args.backend, reserve_frac=args.reserve)
    rows = [{"scenario": r.scenario_id, **{k: r.costs[k] for k in ("total", "LC", "SUSD", "OP", "OG")}} for r in results]
    rows.append({"scenario": "expected", **table})
    out = _out_path(args, args.out)
    ingest.write_csv(out, rows, ["scenario", "total", "LC", "SUSD", "OP", "OG"])
    print(f"expected total cost {table['total']:.6g} over {len(results)} scenarios -> {out}")
    return [out]


def cmd_report(args):
    if not args.compare:
        raise UsageError("report needs --compare POOL_A POOL_B")
    a, b = (ingest.load_pool(p) for p in args.compare)
    if a.horizon != b.horizon:
        raise ingest.DataError("pools have different horizons", "horizon")
    rows = []
    for pool in (a, b):
        label = {"relevance": "sds", "normal": "smc"}[pool.sampler_kind]
        rows.extend(analysis.tail_report(pool, label, args.hill_k, args.hill_shift).rows())
    out = _out_path(args, args.out)
    ingest.write_csv(out, rows)
    frac, _ = analysis.marginal_agreement(a, b)
    print(f"marginal agreement (3 SE): {frac:.4f}; tail table -> {out}")
    outputs = [out]
    if args.gnuplot:
        script = _out_path(args, str(out) + ".gp")
        script.write_text(_gnuplot(out.name))
        outputs.append(script)
    return outputs


def _gnuplot(csv_name):
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set xlabel 't'\nset ylabel 'excess kurtosis'\n"
        f"plot '< grep ^sds {csv_name}' using 2:4 with linespoints title 'SDS', \\\n"
        f"     '< grep ^smc {csv_name}' using 2:4 with linespoints title 'SMC'\n"
    )


def cmd_validate(args):
    kind, warnings = ingest.validate_file(args.file)
    for w in warnings:
        print(f"warning: {w}")
    print(f"{args.file}: valid {kind} file, {len(warnings)} warnings")
    return []


def cmd_sensitivity(args):
    rows = fragility.sensitivity_grid(n=args.n, seed=args.seed)
    out = _out_path(args, args.out)
    ingest.write_csv(out, rows, ["mi", "mj", "si", "sj", "rho", "corr", "n", "seed"])
    print(f"wrote {len(rows)} cells to {out}")
    return [out]


def cmd_lindev(args):
    p = windfield.harvey_like()
    lat, lon, dev = windfield.linearity_mesh_study(p, half_width_km=args.half_width, n=args.mesh)
    rows = []
    for k, name in enumerate(windfield.PARAM_NAMES):
        for j, sgn in enumerate(("-", "+")):
            for i in range(args.mesh):
                for m in range(args.mesh):
                    rows.append(
                        {
                            "param": name,
                            "sign": sgn,
                            "lat_deg": float(np.degrees(lat[i, m])),
                            "lon_deg": float(np.degrees(lon[i, m])),
                            "deviation": float(dev[k, j, i, m]),
                        }
                    )
    out = _out_path(args, args.out)
    ingest.write_csv(out, rows)
    print(f"cells below {args.threshold}: {windfield.fraction_below(dev, args.threshold):.4f} -> {out}")
    return [out]


def cmd_pipeline(args):
    """The canonical end-to-end experiment on a bundle: tails plus the preventive-control trade-off."""
    b = _bundle(args)
    pools = experiment.sample_pair(b, n=args.n, seed=args.seed, workers=args.workers)
    outputs = []
    for label, pool in (("sds", pools.sds), ("smc", pools.smc)):
        p = _out_path(args, f"pool_{label}.jsonl")
        ingest.save_pool(pool, p)
        outputs.append(p)
    t_peak = analysis.peak_timestep(b.grid, b.track)
    tails = experiment.tail_comparison(pools, t_peak)
    frac, _ = analysis.marginal_agreement(pools.sds, pools.smc)
    r = experiment.preventive_tradeoff(b, pools, seed=args.seed, backend=args.backend, gap=args.gap)
    rows = []
    for pos, sid in enumerate(r.test_ids):
        row = {"decile": pos + 1, "scenario": sid, "q_hat": r.test_qhat[pos], "q": r.test_q[pos]}
        row.update({label: r.totals[label][pos] for label in experiment.PLAN_LABELS})
        rows.append(row)
    costs = _out_path(args, "tradeoff.csv")
    ingest.write_csv(costs, rows)
    summary = _out_path(args, "summary.json")
    summary.write_text(
        json.dumps(
            {"peak_timestep": t_peak, "marginal_agreement": frac, "tails": tails, "checks": r.checks(),
             "expected_cost": r.tables},
            indent=1,
            allow_nan=True,
        )
        + "\n"
    )
    outputs += [costs, summary]
    print(f"agreement {frac:.4f}; peak t={t_peak}; checks {r.checks()}")
    return outputs


def cmd_rerun(args):
    doc = json.loads(Path(args.manifest).read_text())
    if doc.get("schema") != "hurricane-sds/manifest":
        raise ingest.DataError("not a manifest file", "schema")
    code = main(doc["argv"])
    if code:
        raise SdsError(f"replayed command exited with {code}")
    same = all(_file_hash(p) == h for p, h in doc["outputs"].items())
    print("outputs identical to manifest" if same else "outputs DIFFER from manifest")
    if not same:
        raise SdsError("rerun produced different artifacts")
    return []


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hurricane-sds", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20170825)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def case_args(p, track=True):
        p.add_argument("--case", choices=TOY_NAMES)
        p.add_argument("--grid")
        if track:
            p.add_argument("--track")

    def solver_args(p):
        p.add_argument("--backend", choices=sorted(BACKENDS), default="highs")
        p.add_argument("--gap", type=float, default=1e-3)
        p.add_argument("--time-limit", type=float, default=600.0)
        p.add_argument("--reserve", type=float, default=0.0, help="spinning reserve as a fraction of demand")

    p = sub.add_parser("sample", help="draw a scenario pool")
    case_args(p)
    p.add_argument("--method", choices=sorted(METHODS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p-threshold", type=float, default=None, help=f"relevance threshold (default {P_THRESHOLD})")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    for name, fn, hlp in (("analyze", cmd_analyze, "tail metrics per timestep"),):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--pool", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--hill-k", type=float, default=analysis.HILL_K_FRAC)
        p.add_argument("--hill-shift", type=float, default=analysis.HILL_SHIFT)
        p.set_defaults(func=fn)

    p = sub.add_parser("select", help="weighted scenario selection")
    p.add_argument("--pool", required=True)
    p.add_argument("--rule", choices=analysis.RULES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("plan", help="solve the stochastic unit commitment for a selection")
    case_args(p, track=False)
    p.add_argument("--selection", required=True)
    p.add_argument("--out", required=True)
    solver_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("evaluate", help="dispatch a fixed plan over test scenarios")
    case_args(p, track=False)
    p.add_argument("--plan", required=True)
    p.add_argument("--test", required=True, help="selection file with the test scenarios")
    p.add_argument("--out", required=True)
    solver_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="tail table comparing two pools")
    p.add_argument("--compare", nargs=2, metavar=("POOL_A", "POOL_B"))
    p.add_argument("--out", required=True)
    p.add_argument("--hill-k", type=float, default=analysis.HILL_K_FRAC)
    p.add_argument("--hill-shift", type=float, default=analysis.HILL_SHIFT)
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="check any supported file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sensitivity", help="two-component correlation experiment")
    p.add_argument("--n", type=int, default=fragility.SENSITIVITY_N)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("lindev", help="linearity deviation over a mesh")
    p.add_argument("--mesh", type=int, default=51)
    p.add_argument("--half-width", type=float, default=250.0, help="km")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lindev)

    p = sub.add_parser("pipeline", help="end-to-end experiment on a bundle")
    case_args(p)
    p.add_argument("--n", type=int, default=None)
    solver_args(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("rerun", help="replay a manifest and compare outputs")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        outputs = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SdsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if outputs:
        _write_manifest(args, argv, outputs, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
