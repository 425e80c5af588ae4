"""File formats: grid (JSON), track (CSV), pool (JSONL), selection, plan (JSON), reports (CSV).

Every file carries a schema name and version; unknown versions are
rejected. Units are declared in each file and must match the expected
ones exactly. Angles are stored in degrees. Floats are written with
``repr`` so that load(save(x)) == x bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .analysis import WeightedSelection
from .errors import DataError, DomainError
from .grid import Bus, Generator, GridCase, Line, Segment
from .sampler import SAMPLER_KINDS, Scenario, ScenarioPool
from .toycases import TOY_NAMES, make_toy_case
from .ucmodel import CommitmentPlan
from .windfield import HurricaneTrack, TrackStep

VERSION = 1
GRID_SCHEMA = "hurricane-sds/grid"
TRACK_SCHEMA = "hurricane-sds/track"
POOL_SCHEMA = "hurricane-sds/pool"
SELECTION_SCHEMA = "hurricane-sds/selection"
PLAN_SCHEMA = "hurricane-sds/plan"

GRID_UNITS = {
    "demand": "MW",
    "lc_cost": "currency/MWh",
    "angle": "deg",
    "position": "deg",
    "power": "MW",
    "cost": "currency/MWh",
    "startup_cost": "currency",
    "reactance": "pu",
    "base": "MVA",
    "w0": "m/s",
    "min_time": "timesteps",
}

# column -> (TrackStep field, unit)
TRACK_COLUMNS = [
    ("pc_hpa", "pc"),
    ("rmax_km", "rmax"),
    ("b", "b"),
    ("lat_deg", "lat_deg"),
    ("lon_deg", "lon_deg"),
    ("speed_mps", "speed"),
    ("heading_deg", "heading_deg"),
    ("sd_pc_hpa", "sigma_pc"),
    ("sd_rmax_km", "sigma_rmax"),
    ("sd_b", "sigma_b"),
    ("sd_lat_deg", "sigma_lat_deg"),
    ("sd_lon_deg", "sigma_lon_deg"),
    ("sd_speed_mps", "sigma_speed"),
    ("sd_heading_deg", "sigma_heading_deg"),
]
TRACK_META_UNITS = {"pn": "hPa", "rho": "kg/m3"}


# --- helpers -------------------------------------------------------------------------


def _check_header(doc: dict, schema: str, path) -> None:
    if not isinstance(doc, dict):
        raise DataError("expected a JSON object", str(path))
    if doc.get("schema") != schema:
        raise DataError(f"expected schema {schema!r}, found {doc.get('schema')!r}", "schema")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported version {doc.get('version')!r}; this reader handles {VERSION}", "version")


def _check_units(found: dict, expected: dict) -> None:
    if not isinstance(found, dict):
        raise DataError("missing units block", "units")
    for key, unit in expected.items():
        if found.get(key) != unit:
            raise DataError(f"expected unit {unit!r}, found {found.get(key)!r}", f"units.{key}")


def _field(obj: dict, key: str, path: str, kind=float):
    if key not in obj:
        raise DataError("missing field", f"{path}.{key}")
    v = obj[key]
    try:
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise TypeError
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise TypeError
            return v
        if kind is str:
            if not isinstance(v, str):
                raise TypeError
            return v
        return kind(v)
    except (TypeError, ValueError):
        raise DataError(f"expected {kind.__name__}, found {v!r}", f"{path}.{key}") from None


def _float_list(obj, key, path, n=None):
    v = obj.get(key)
    if not isinstance(v, list):
        raise DataError("expected a list", f"{path}.{key}")
    out = []
    for k, x in enumerate(v):
        if x is None:
            out.append(math.inf)  # null encodes an infinite price
        elif isinstance(x, bool) or not isinstance(x, (int, float)):
            raise DataError(f"expected number, found {x!r}", f"{path}.{key}[{k}]")
        else:
            out.append(float(x))
    if n is not None and len(out) != n:
        raise DataError(f"expected {n} values, found {len(out)}", f"{path}.{key}")
    return tuple(out)


def _enc(x: float):
    return None if math.isinf(x) else x


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError("file not found", str(path)) from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc}", str(path)) from None


def _write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n")
    return path


# --- grid --------------------------------------------------------------------------------


def grid_to_dict(grid: GridCase) -> dict:
    return {
        "schema": GRID_SCHEMA,
        "version": VERSION,
        "units": dict(GRID_UNITS),
        "name": grid.name,
        "horizon": grid.horizon,
        "slack_bus": grid.slack_bus,
        "base_mva": grid.base_mva,
        "buses": [
            {
                "id": b.id,
                "lat_deg": b.lat_deg,
                "lon_deg": b.lon_deg,
                "demand": list(b.demand),
                "lc_cost": [_enc(c) for c in b.lc_cost],
                "theta_min_deg": b.theta_min_deg,
                "theta_max_deg": b.theta_max_deg,
            }
            for b in grid.buses
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "cost": g.cost,
                "startup_cost": g.startup_cost,
                "shutdown_cost": g.shutdown_cost,
                "pmax": g.pmax,
                "pmin": g.pmin,
                "ramp_up": g.ramp_up,
                "ramp_down": g.ramp_down,
                "min_up": g.min_up,
                "min_down": g.min_down,
                "og_cost": g.og_cost,
                "u0": g.u0,
                "p0": g.p0,
                "init_hours": g.init_hours,
            }
            for g in grid.generators
        ],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "reactance": ln.reactance,
                "flow_limit": ln.flow_limit,
                "segments": [
                    {"id": s.id, "lat_deg": s.lat_deg, "lon_deg": s.lon_deg, "beta": s.beta, "w0": s.w0}
                    for s in ln.segments
                ],
            }
            for ln in grid.lines
        ],
    }


def grid_from_dict(doc: dict, path="grid") -> GridCase:
    _check_header(doc, GRID_SCHEMA, path)
    _check_units(doc.get("units"), GRID_UNITS)
    horizon = _field(doc, "horizon", "", int)
    buses, gens, lines = [], [], []
    for k, b in enumerate(doc.get("buses") or []):
        p = f"buses[{k}]"
        buses.append(
            Bus(
                id=_field(b, "id", p, str),
                demand=_float_list(b, "demand", p, horizon),
                lc_cost=_float_list(b, "lc_cost", p, horizon),
                lat_deg=_field(b, "lat_deg", p),
                lon_deg=_field(b, "lon_deg", p),
                theta_min_deg=_field(b, "theta_min_deg", p),
                theta_max_deg=_field(b, "theta_max_deg", p),
            )
        )
    for k, g in enumerate(doc.get("generators") or []):
        p = f"generators[{k}]"
        ih = g.get("init_hours")
        if ih is not None and (isinstance(ih, bool) or not isinstance(ih, int) or ih < 0):
            raise DataError("expected a nonnegative integer or null", f"{p}.init_hours")
        gens.append(
            Generator(
                id=_field(g, "id", p, str),
                bus=_field(g, "bus", p, str),
                cost=_field(g, "cost", p),
                startup_cost=_field(g, "startup_cost", p),
                shutdown_cost=_field(g, "shutdown_cost", p),
                pmax=_field(g, "pmax", p),
                pmin=_field(g, "pmin", p),
                ramp_up=_field(g, "ramp_up", p),
                ramp_down=_field(g, "ramp_down", p),
                min_up=_field(g, "min_up", p, int),
                min_down=_field(g, "min_down", p, int),
                og_cost=_field(g, "og_cost", p),
                u0=_field(g, "u0", p, int),
                p0=_field(g, "p0", p),
                init_hours=ih,
            )
        )
    for k, ln in enumerate(doc.get("lines") or []):
        p = f"lines[{k}]"
        segs = []
        for j, s in enumerate(ln.get("segments") or []):
            sp = f"{p}.segments[{j}]"
            segs.append(
                Segment(
                    id=_field(s, "id", sp, str),
                    lat_deg=_field(s, "lat_deg", sp),
                    lon_deg=_field(s, "lon_deg", sp),
                    beta=_field(s, "beta", sp),
                    w0=_field(s, "w0", sp),
                )
            )
        lines.append(
            Line(
                id=_field(ln, "id", p, str),
                from_bus=_field(ln, "from_bus", p, str),
                to_bus=_field(ln, "to_bus", p, str),
                reactance=_field(ln, "reactance", p),
                flow_limit=_field(ln, "flow_limit", p),
                segments=tuple(segs),
            )
        )
    grid = GridCase(
        name=_field(doc, "name", "", str),
        buses=tuple(buses),
        generators=tuple(gens),
        lines=tuple(lines),
        horizon=horizon,
        slack_bus=_field(doc, "slack_bus", "", str),
        base_mva=_field(doc, "base_mva", ""),
    )
    grid.validate()
    return grid


def save_grid(grid: GridCase, path) -> Path:
    return _write_json(path, grid_to_dict(grid))


def load_grid(path) -> GridCase:
    return grid_from_dict(_read_json(path), path)


# --- track -----------------------------------------------------------------------------


def track_to_csv(track: HurricaneTrack) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {TRACK_SCHEMA}\n# version: {VERSION}\n# name: {track.name}\n")
    buf.write(f"# pn_hpa: {track.pn!r}\n# rho_kgm3: {track.rho!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [c for c, _ in TRACK_COLUMNS])
    for t, s in enumerate(track.steps):
        w.writerow([t] + [repr(float(getattr(s, f))) for _, f in TRACK_COLUMNS])
    return buf.getvalue()


def track_from_csv(text: str, path="track") -> HurricaneTrack:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    if meta.get("schema") != TRACK_SCHEMA:
        raise DataError(f"expected schema {TRACK_SCHEMA!r}, found {meta.get('schema')!r}", "schema")
    if meta.get("version") != str(VERSION):
        raise DataError(f"unsupported version {meta.get('version')!r}", "version")
    for key, unit in (("pn_hpa", "hPa"), ("rho_kgm3", "kg/m3")):
        if key not in meta:
            stem = key.split("_")[0]
            alt = [k for k in meta if k.startswith(stem + "_")]
            hint = f"; found {alt[0]!r}" if alt else ""
            raise DataError(f"missing header; expected unit {unit}{hint}", key)
    rows = list(csv.reader(body))
    if not rows:
        raise DataError("no column header", str(path))
    header = rows[0]
    expected = ["t"] + [c for c, _ in TRACK_COLUMNS]
    for k, (got, want) in enumerate(zip(header, expected)):
        if got != want:
            raise DataError(f"expected column {want!r}, found {got!r}", f"columns[{k}]")
    if len(header) != len(expected):
        raise DataError(f"expected {len(expected)} columns, found {len(header)}", "columns")
    steps = []
    for i, row in enumerate(rows[1:]):
        p = f"rows[{i}]"
        if len(row) != len(expected):
            raise DataError(f"expected {len(expected)} values", p)
        if row[0] != str(i):
            raise DataError(f"timesteps must be 0, 1, 2, ...; found {row[0]!r}", f"{p}.t")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(str(exc), p) from None
        steps.append(TrackStep(**{f: v for (_, f), v in zip(TRACK_COLUMNS, vals)}))
    try:
        track = HurricaneTrack(tuple(steps), pn=float(meta["pn_hpa"]), rho=float(meta["rho_kgm3"]), name=meta.get("name", "track"))
        for t, s in enumerate(track.steps):
            track.params(t)
            s.sigma()
    except (DomainError, ValueError) as exc:
        raise DataError(str(exc), f"rows[{t}]") from None
    return track


def save_track(track: HurricaneTrack, path) -> Path:
    path = Path(path)
    path.write_text(track_to_csv(track))
    return path


def load_track(path) -> HurricaneTrack:
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", str(path))
    return track_from_csv(path.read_text(), path)


# --- pool ------------------------------------------------------------------------------------


def pool_to_jsonl(pool: ScenarioPool) -> str:
    head = {
        "schema": POOL_SCHEMA,
        "version": VERSION,
        **pool.header(),
        "segment_ids": list(pool.segment_ids),
        "line_ids": list(pool.line_ids),
        "segment_line": [pool.line_ids[k] for k in pool.segment_line],
        "relevance": [list(r) for r in pool.relevance],
        "extra": pool.extra,
    }
    out = [json.dumps(head)]
    for s, g, t in zip(pool.ev_scenario, pool.ev_segment, pool.ev_time):
        out.append(
            json.dumps(
                {
                    "scenario": int(s),
                    "segment_id": pool.segment_ids[g],
                    "line_id": pool.line_ids[pool.segment_line[g]],
                    "t_fail": int(t),
                }
            )
        )
    return "\n".join(out) + "\n"


def pool_from_jsonl(text: str, path="pool") -> ScenarioPool:
    lines = text.splitlines()
    if not lines:
        raise DataError("empty pool file", str(path))
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid header: {exc}", "header") from None
    _check_header(head, POOL_SCHEMA, path)
    if head.get("sampler_kind") not in SAMPLER_KINDS:
        raise DataError(f"unknown sampler kind {head.get('sampler_kind')!r}", "header.sampler_kind")
    seg_ids = tuple(head["segment_ids"])
    line_ids = tuple(head["line_ids"])
    lidx = {l: k for k, l in enumerate(line_ids)}
    sidx = {s: k for k, s in enumerate(seg_ids)}
    try:
        seg_line = np.array([lidx[l] for l in head["segment_line"]], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"unknown line {exc.args[0]!r}", "header.segment_line") from None
    n, horizon = int(head["n"]), int(head["horizon"])
    ev = []
    for i, raw in enumerate(lines[1:], start=1):
        if not raw.strip():
            continue
        try:
            r = json.loads(raw)
            s, g, t = int(r["scenario"]), sidx[r["segment_id"]], int(r["t_fail"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad record ({exc})", f"line {i + 1}") from None
        if line_ids[seg_line[g]] != r.get("line_id"):
            raise DataError("segment does not belong to the stated line", f"line {i + 1}")
        if not (0 <= s < n and 0 <= t < horizon):
            raise DataError("scenario or timestep out of range", f"line {i + 1}")
        ev.append((s, g, t))
    ev.sort()
    arr = np.array(ev, dtype=np.int64).reshape(-1, 3)
    return ScenarioPool(
        sampler_kind=head["sampler_kind"],
        seed=int(head["seed"]),
        n_scenarios=n,
        horizon=horizon,
        segment_ids=seg_ids,
        line_ids=line_ids,
        segment_line=seg_line,
        ev_scenario=arr[:, 0].copy(),
        ev_segment=arr[:, 1].copy(),
        ev_time=arr[:, 2].copy(),
        relevance=tuple(tuple(r) for r in head.get("relevance", [])),
        track_hash=head.get("track_hash", ""),
        grid_hash=head.get("grid_hash", ""),
        extra=head.get("extra", {}),
    )


def save_pool(pool: ScenarioPool, path) -> Path:
    path = Path(path)
    path.write_text(pool_to_jsonl(pool))
    return path


def load_pool(path) -> ScenarioPool:
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", str(path))
    return pool_from_jsonl(path.read_text(), path)


# --- selection -----------------------------------------------------------------------------


def selection_to_dict(sel: WeightedSelection, pool: ScenarioPool) -> dict:
    return {
        "schema": SELECTION_SCHEMA,
        "version": VERSION,
        "rule": sel.rule,
        "n": sel.n,
        "seed": sel.seed,
        "pool_kind": sel.pool_kind,
        "horizon": pool.horizon,
        "grid_hash": pool.grid_hash,
        "scenarios": [
            {"id": sid, "weight": w, "line_fail": dict(pool.scenario(sid).line_fail)}
            for sid, w in zip(sel.scenario_ids, sel.weights)
        ],
    }


def selection_from_dict(doc: dict, path="selection"):
    """Return (WeightedSelection, list of Scenario, horizon)."""
    _check_header(doc, SELECTION_SCHEMA, path)
    horizon = _field(doc, "horizon", "", int)
    ids, weights, scen = [], [], []
    for k, s in enumerate(doc.get("scenarios") or []):
        p = f"scenarios[{k}]"
        sid = _field(s, "id", p, int)
        ids.append(sid)
        weights.append(_field(s, "weight", p))
        lf = s.get("line_fail")
        if not isinstance(lf, dict):
            raise DataError("expected an object of line id -> failure timestep", f"{p}.line_fail")
        for lid, t in lf.items():
            if isinstance(t, bool) or not isinstance(t, int) or not 0 <= t < horizon:
                raise DataError(f"failure time {t!r} outside 0..{horizon - 1}", f"{p}.line_fail.{lid}")
        scen.append(Scenario.from_times(sid, lf))
    try:
        sel = WeightedSelection(
            rule=_field(doc, "rule", "", str),
            n=_field(doc, "n", "", int),
            scenario_ids=tuple(ids),
            weights=tuple(weights),
            seed=_field(doc, "seed", "", int),
            pool_kind=doc.get("pool_kind", ""),
        )
    except DomainError as exc:
        raise DataError(str(exc), "scenarios") from None
    return sel, scen, horizon


def save_selection(sel: WeightedSelection, pool: ScenarioPool, path) -> Path:
    return _write_json(path, selection_to_dict(sel, pool))


def load_selection(path):
    return selection_from_dict(_read_json(path), path)


# --- plan ----------------------------------------------------------------------------------------


def plan_to_dict(plan: CommitmentPlan, grid_hash: str = "") -> dict:
    return {
        "schema": PLAN_SCHEMA,
        "version": VERSION,
        "grid_hash": grid_hash,
        "generator_ids": list(plan.generator_ids),
        "horizon": plan.horizon,
        "u0": list(plan.u0),
        "u": plan.u.tolist(),
        "y": plan.y.tolist(),
        "z": plan.z.tolist(),
        "objective": plan.objective,
        "gap": plan.gap,
        "status": plan.status,
        "meta": plan.meta,
    }


def plan_from_dict(doc: dict, path="plan") -> CommitmentPlan:
    _check_header(doc, PLAN_SCHEMA, path)
    gids = tuple(doc.get("generator_ids") or ())
    T = _field(doc, "horizon", "", int)
    arrs = {}
    for key in ("u", "y", "z"):
        a = np.asarray(doc.get(key), dtype=np.int64)
        if a.shape != (len(gids), T):
            raise DataError(f"expected shape {(len(gids), T)}, found {a.shape}", key)
        arrs[key] = a
    return CommitmentPlan(
        generator_ids=gids,
        u=arrs["u"],
        y=arrs["y"],
        z=arrs["z"],
        u0=tuple(doc.get("u0") or ()),
        objective=float(doc.get("objective", float("nan"))),
        gap=float(doc.get("gap", 0.0)),
        status=doc.get("status", ""),
        meta=doc.get("meta", {}),
    )


def save_plan(plan: CommitmentPlan, path, grid_hash: str = "") -> Path:
    return _write_json(path, plan_to_dict(plan, grid_hash))


def load_plan(path) -> CommitmentPlan:
    return plan_from_dict(_read_json(path), path)


# --- reports ------------------------------------------------------------------------------------


def write_csv(path, rows, columns=None) -> Path:
    rows = list(rows)
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# --- validation ----------------------------------------------------------------------------------


def detect_kind(path) -> str:
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", str(path))
    with path.open() as fh:
        first = fh.readline()
    if first.startswith("#"):
        return "track"
    try:
        head = json.loads(first) if path.suffix == ".jsonl" else json.loads(path.read_text())
    except json.JSONDecodeError:
        raise DataError("not a recognised file (neither JSON nor track CSV)", str(path)) from None
    kinds = {GRID_SCHEMA: "grid", POOL_SCHEMA: "pool", SELECTION_SCHEMA: "selection", PLAN_SCHEMA: "plan"}
    schema = head.get("schema") if isinstance(head, dict) else None
    if schema not in kinds:
        raise DataError(f"unknown schema {schema!r}", "schema")
    return kinds[schema]


def validate_file(path) -> tuple:
    """Load a file of any supported kind; returns (kind, warnings)."""
    kind = detect_kind(path)
    loader = {"grid": load_grid, "track": load_track, "pool": load_pool, "selection": load_selection, "plan": load_plan}
    obj = loader[kind](path)
    warnings = obj.validate() if kind == "grid" else []
    return kind, warnings


def load_case(name_or_path):
    """A toy case name, or a directory containing grid.json and track.csv."""
    if name_or_path in TOY_NAMES:
        return make_toy_case(name_or_path)
    from .toycases import CaseBundle

    d = Path(name_or_path)
    return CaseBundle(load_grid(d / "grid.json"), load_track(d / "track.csv"))
