"""Canned desk-scale cases.

micro2
    Two buses, one line, three timesteps. Small enough for the brute-force
    commitment oracle.
ring6
    Six-bus ring; any two line outages split it into islands.
coastal12
    Twelve buses in a coastal band crossed by a landfalling storm over eight
    timesteps. Cheap inland generation feeds coastal load through lines that
    lie in the storm's path. Each coastal bus hangs off the mainland through
    one or two lines, so severe outages island it unless its local peaker is
    committed, and peakers are expensive to keep committed.
    This is the canonical case for the end-to-end experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, InvariantError
from .grid import Bus, Generator, GridCase, Line, great_circle_km, split_span
from .windfield import HurricaneTrack, TrackStep

TOY_NAMES = ("micro2", "ring6", "coastal12")


@dataclass(frozen=True)
class CaseConfig:
    p_threshold: float = 1e-4
    seed: int = 20170825
    segment_km: float = 20.0
    hill_k_frac: float = 0.05
    hill_shift: float = 1.0
    n_pool: int = 10_000
    mip_gap: float = 1e-3
    time_limit: float = 600.0
    reserve_frac: float = 0.0


@dataclass(frozen=True)
class CaseBundle:
    grid: GridCase
    track: HurricaneTrack
    config: CaseConfig = field(default_factory=CaseConfig)


def make_toy_case(name: str) -> CaseBundle:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise DataError(f"unknown toy case {name!r}; choose from {', '.join(TOY_NAMES)}") from None
    bundle = builder()
    bundle.grid.validate()
    if name == "coastal12":
        _check_storm_reach(bundle, COASTAL_MIN_NEAR_SEGMENTS)
    return bundle


def segments_within_rmax(bundle: CaseBundle, t: int) -> list:
    """Segment ids whose stretch of line passes within Rmax of the storm center at step ``t``."""
    step = bundle.track.steps[t]
    buses = {b.id: b for b in bundle.grid.buses}
    out = []
    for line in bundle.grid.lines:
        a, b = buses[line.from_bus], buses[line.to_bus]
        n = len(line.segments)
        for k, seg in enumerate(line.segments):
            fs = np.linspace(k / n, (k + 1) / n, 101)
            d = min(
                great_circle_km(step.lat_deg, step.lon_deg, a.lat_deg + f * (b.lat_deg - a.lat_deg), a.lon_deg + f * (b.lon_deg - a.lon_deg))
                for f in fs
            )
            if d <= step.rmax:
                out.append(seg.id)
    return out


def _check_storm_reach(bundle: CaseBundle, minimum: int):
    from .analysis import peak_timestep

    t = peak_timestep(bundle.grid, bundle.track)
    near = segments_within_rmax(bundle, t)
    if len(near) < minimum:
        raise InvariantError(f"{bundle.grid.name}: only {len(near)} segments within Rmax at peak step {t}; need {minimum}")


def _bus(bid, lat, lon, demand, lc=1000.0):
    return Bus(bid, tuple(float(d) for d in demand), tuple(lc for _ in demand), lat, lon)


def _line(lid, a, b, buses, x, limit, beta, w0, seg_km=20.0):
    pa, pb = buses[a], buses[b]
    segs = split_span(lid, pa.lat_deg, pa.lon_deg, pb.lat_deg, pb.lon_deg, beta, w0, seg_km)
    return Line(lid, a, b, x, limit, segs)


# --- micro2 -----------------------------------------------------------------------


def _micro2(horizon=3) -> CaseBundle:
    demand = [60.0, 90.0, 75.0, 50.0, 80.0, 95.0][:horizon]
    buses = {
        "A": _bus("A", 29.8, -95.9, [0.0] * horizon),
        "B": _bus("B", 29.4, -95.5, demand),
    }
    gens = (
        Generator("G1", "A", 20.0, 300.0, 50.0, 150.0, 30.0, 150.0, 150.0, og_cost=200.0),
        Generator("G2", "B", 60.0, 100.0, 20.0, 60.0, 20.0, 60.0, 60.0, og_cost=200.0),
    )
    lines = (_line("AB", "A", "B", buses, 0.1, 100.0, 0.25, 55.0),)
    grid = GridCase("micro2", tuple(buses.values()), gens, lines, horizon, "A")
    steps = [
        TrackStep(970.0, 40.0, 1.4, 28.6 + 0.3 * t, -95.6, 5.0, 0.0, 8.0, 4.0, 0.05, 0.1, 0.1, 0.5, 5.0)
        for t in range(horizon)
    ]
    return CaseBundle(grid, HurricaneTrack(tuple(steps), pn=1010.0, rho=1.15, name="micro2-track"))


# --- ring6 ------------------------------------------------------------------------


def _ring6() -> CaseBundle:
    horizon = 4
    coords = [(30.4, -96.2), (30.4, -95.4), (29.9, -95.0), (29.4, -95.4), (29.4, -96.2), (29.9, -96.6)]
    demand = [[0, 0, 0, 0], [40, 50, 55, 45], [60, 70, 75, 65], [50, 60, 60, 50], [30, 35, 40, 30], [45, 50, 55, 45]]
    buses = {f"B{k + 1}": _bus(f"B{k + 1}", *coords[k], demand[k]) for k in range(6)}
    gens = (
        Generator("G1", "B1", 18.0, 500.0, 100.0, 300.0, 60.0, 150.0, 150.0, og_cost=150.0, u0=1),
        Generator("G4", "B4", 55.0, 200.0, 40.0, 80.0, 20.0, 80.0, 80.0, og_cost=150.0),
    )
    ids = list(buses)
    lines = tuple(
        _line(f"L{k + 1}{(k + 1) % 6 + 1}", ids[k], ids[(k + 1) % 6], buses, 0.08, 160.0, 0.25, 55.0)
        for k in range(6)
    )
    grid = GridCase("ring6", tuple(buses.values()), gens, lines, horizon, "B1")
    steps = [
        TrackStep(968.0, 40.0, 1.4, 28.9 + 0.35 * t, -95.8, 5.0, 0.0, 8.0, 4.0, 0.05, 0.1, 0.1, 0.5, 5.0)
        for t in range(horizon)
    ]
    return CaseBundle(grid, HurricaneTrack(tuple(steps), pn=1010.0, rho=1.15, name="ring6-track"))


# --- coastal12 ----------------------------------------------------------------------

COASTAL_BUSES = {
    # id: (lat, lon, base load MW)
    "N1": (31.00, -96.80, 40.0),
    "N2": (31.10, -95.60, 60.0),
    "N3": (31.00, -94.60, 40.0),
    "M1": (30.05, -96.55, 50.0),
    "M2": (30.15, -95.65, 70.0),
    "M3": (30.05, -94.75, 50.0),
    "C1": (29.30, -96.90, 60.0),
    "C2": (29.45, -96.20, 90.0),
    "C3": (29.55, -95.60, 120.0),
    "C4": (29.45, -95.05, 100.0),
    "C5": (29.35, -94.45, 60.0),
    "C6": (29.05, -95.30, 80.0),
}

COASTAL_LINES = [
    ("N1N2", "N1", "N2", 0.06, 300.0),
    ("N2N3", "N2", "N3", 0.06, 300.0),
    ("N1M1", "N1", "M1", 0.05, 250.0),
    ("N2M2", "N2", "M2", 0.05, 300.0),
    ("N3M3", "N3", "M3", 0.05, 250.0),
    ("M1M2", "M1", "M2", 0.07, 200.0),
    ("M2M3", "M2", "M3", 0.07, 200.0),
    ("M1C1", "M1", "C1", 0.06, 160.0),
    ("M1C2", "M1", "C2", 0.06, 160.0),
    ("M2C3", "M2", "C3", 0.05, 220.0),
    ("M2C2", "M2", "C2", 0.06, 160.0),
    ("M3C4", "M3", "C4", 0.05, 200.0),
    ("M3C5", "M3", "C5", 0.06, 160.0),
    ("C3C6", "C3", "C6", 0.08, 120.0),
    ("C4C6", "C4", "C6", 0.08, 120.0),
]

# load shape over the eight 3-hour steps
COASTAL_PROFILE = (0.85, 0.80, 0.85, 0.95, 1.05, 1.10, 1.05, 0.95)

COASTAL_TRACK = [
    # pc, rmax, b, lat, lon
    (962.0, 40.0, 1.40, 27.50, -95.55),
    (960.0, 40.0, 1.40, 28.00, -95.65),
    (958.0, 40.0, 1.40, 28.50, -95.75),
    (958.0, 42.0, 1.40, 29.00, -95.85),
    (962.0, 45.0, 1.35, 29.50, -95.95),
    (970.0, 48.0, 1.30, 30.00, -96.05),
    (980.0, 52.0, 1.25, 30.50, -96.15),
    (990.0, 56.0, 1.20, 31.00, -96.25),
]
# one dominant shared uncertainty (central pressure) drives joint failures
COASTAL_SIGMA = (25.0, 4.0, 0.02, 0.03, 0.03, 0.3, 2.0)
# longer than any span, so each line is a single fragile segment
COASTAL_SEGMENT_KM = 1000.0
COASTAL_LC = 300.0
COASTAL_MIN_NEAR_SEGMENTS = 4
COASTAL_BETA = 0.15
COASTAL_W0 = 58.0
COASTAL_INLAND_UNITS = [("GN1", "N1", 18.0, 400.0), ("GN2", "N2", 20.0, 400.0), ("GN3", "N3", 22.0, 300.0)]
COASTAL_INLAND = dict(startup=4000.0, shutdown=500.0, pmin=0.3, ramp=0.5, min_up=2, min_down=2, og=150.0)
COASTAL_PEAKER = dict(cost=120.0, startup=1500.0, shutdown=200.0, cap=1.1, pmin=0.5, min_up=3, min_down=2, og=120.0)


def _coastal12(segment_km=COASTAL_SEGMENT_KM, beta=COASTAL_BETA, w0=COASTAL_W0, sigma=COASTAL_SIGMA,
               peaker=None, limits=None, lc=None, inland=None) -> CaseBundle:
    peaker = dict(COASTAL_PEAKER, **(peaker or {}))
    horizon = len(COASTAL_PROFILE)
    buses = {
        bid: _bus(bid, lat, lon, [round(load * f, 3) for f in COASTAL_PROFILE], COASTAL_LC if lc is None else lc)
        for bid, (lat, lon, load) in COASTAL_BUSES.items()
    }
    inland = dict(COASTAL_INLAND, **(inland or {}))
    gens = [
        Generator(
            gid, bus, cost, inland["startup"], inland["shutdown"], pmax, round(inland["pmin"] * pmax, 3),
            inland["ramp"] * pmax, inland["ramp"] * pmax, inland["min_up"], inland["min_down"], inland["og"],
            u0=1, p0=round(0.5 * pmax, 3),
        )
        for gid, bus, cost, pmax in COASTAL_INLAND_UNITS
    ]
    for bid in ("C1", "C2", "C3", "C4", "C5", "C6"):
        load = COASTAL_BUSES[bid][2]
        pmax = round(peaker["cap"] * load, 3)
        gens.append(
            Generator(
                f"P{bid}", bid, peaker["cost"], peaker["startup"], peaker["shutdown"], pmax,
                round(peaker["pmin"] * pmax, 3), pmax, pmax, peaker["min_up"], peaker["min_down"], peaker["og"],
            )
        )
    limits = limits or {}
    lines = tuple(
        _line(lid, a, b, buses, x, limits.get(lid, lim), beta, w0, segment_km) for lid, a, b, x, lim in COASTAL_LINES
    )
    grid = GridCase("coastal12", tuple(buses.values()), tuple(gens), lines, horizon, "N2")
    steps = tuple(
        TrackStep(pc, rmax, b, lat, lon, 5.0, -10.0, *sigma) for pc, rmax, b, lat, lon in COASTAL_TRACK
    )
    track = HurricaneTrack(steps, pn=1010.0, rho=1.15, name="coastal12-track")
    return CaseBundle(grid, track, CaseConfig(segment_km=segment_km))


def variant(bundle: CaseBundle, **grid_changes) -> CaseBundle:
    return replace(bundle, grid=replace(bundle.grid, **grid_changes))


_BUILDERS = {"micro2": _micro2, "ring6": _ring6, "coastal12": _coastal12}
