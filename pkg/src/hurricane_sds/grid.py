"""Grid case data: buses, generators, lines and their fragile segments.

Timesteps are 0-based indices into the horizon. Angles read from files stay
in degrees on these records; :attr:`Segment.point` converts to radians.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .errors import DataError
from .fragility import FragilityParams
from .windfield import EARTH_RADIUS_KM, GeoPoint


@dataclass(frozen=True)
class Segment:
    id: str
    lat_deg: float
    lon_deg: float
    beta: float
    w0: float

    @property
    def point(self) -> GeoPoint:
        return GeoPoint.from_degrees(self.lat_deg, self.lon_deg)

    @property
    def fragility(self) -> FragilityParams:
        return FragilityParams(self.beta, self.w0)


@dataclass(frozen=True)
class Bus:
    id: str
    demand: tuple  # MW per timestep
    lc_cost: tuple  # currency/MWh per timestep
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    theta_min_deg: float = -60.0
    theta_max_deg: float = 60.0


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    cost: float  # linear generation cost, currency/MWh
    startup_cost: float
    shutdown_cost: float
    pmax: float
    pmin: float
    ramp_up: float
    ramp_down: float  # positive magnitude
    min_up: int = 1
    min_down: int = 1
    og_cost: float = 0.0  # penalty per MW operated below pmin
    u0: int = 0
    p0: float = 0.0
    # hours already spent in state u0 before t=0; None means "long enough"
    init_hours: Optional[int] = None


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    reactance: float  # p.u. on base_mva
    flow_limit: float  # MW
    segments: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class GridCase:
    name: str
    buses: tuple
    generators: tuple
    lines: tuple
    horizon: int
    slack_bus: str
    base_mva: float = 100.0

    def __post_init__(self):
        for f in ("buses", "generators", "lines"):
            object.__setattr__(self, f, tuple(getattr(self, f)))

    # lookups -----------------------------------------------------------
    def bus_index(self) -> dict:
        return {b.id: k for k, b in enumerate(self.buses)}

    def line_index(self) -> dict:
        return {ln.id: k for k, ln in enumerate(self.lines)}

    @property
    def segments(self) -> list:
        return [sg for ln in self.lines for sg in ln.segments]

    def segment_line_map(self) -> dict:
        return {sg.id: ln.id for ln in self.lines for sg in ln.segments}

    def segment_line_index(self) -> np.ndarray:
        """Line index of each segment, in :attr:`segments` order."""
        return np.array([k for k, ln in enumerate(self.lines) for _ in ln.segments], dtype=np.int64)

    def demand_matrix(self) -> np.ndarray:
        return np.array([b.demand for b in self.buses], dtype=float)

    def digest(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]

    def graph(self, failed_lines=()) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(b.id for b in self.buses)
        failed = set(failed_lines)
        for ln in self.lines:
            if ln.id not in failed:
                g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
        return g

    def is_connected(self, failed_lines=()) -> bool:
        return nx.is_connected(self.graph(failed_lines))

    def validate(self) -> list:
        """Check invariants; raises DataError, returns a list of warnings."""
        warnings = []
        seen = set()
        for k, b in enumerate(self.buses):
            if b.id in seen:
                raise DataError(f"duplicate bus id {b.id!r}", f"buses[{k}].id")
            seen.add(b.id)
            for name in ("demand", "lc_cost"):
                vals = getattr(b, name)
                if len(vals) != self.horizon:
                    raise DataError(f"expected {self.horizon} values", f"buses[{k}].{name}")
                if any(v < 0 for v in vals):
                    raise DataError("must be nonnegative", f"buses[{k}].{name}")
            if not b.theta_min_deg < b.theta_max_deg:
                raise DataError("empty angle range", f"buses[{k}]")
        if self.slack_bus not in seen:
            raise DataError(f"unknown slack bus {self.slack_bus!r}", "slack_bus")
        gids = set()
        for k, g in enumerate(self.generators):
            p = f"generators[{k}]"
            if g.id in gids:
                raise DataError(f"duplicate generator id {g.id!r}", f"{p}.id")
            gids.add(g.id)
            if g.bus not in seen:
                raise DataError(f"unknown bus {g.bus!r}", f"{p}.bus")
            if not (g.pmax > 0 and 0 <= g.pmin <= g.pmax):
                raise DataError("need 0 <= pmin <= pmax, pmax > 0", p)
            if g.ramp_up <= 0 or g.ramp_down <= 0:
                raise DataError("ramp limits must be positive magnitudes", p)
            if g.min_up < 1 or g.min_down < 1:
                raise DataError("minimum up/down times must be >= 1", p)
            if min(g.cost, g.startup_cost, g.shutdown_cost, g.og_cost) < 0:
                raise DataError("costs must be nonnegative", p)
            if g.u0 not in (0, 1):
                raise DataError("u0 must be 0 or 1", f"{p}.u0")
        lids, sids = set(), set()
        for k, ln in enumerate(self.lines):
            p = f"lines[{k}]"
            if ln.id in lids:
                raise DataError(f"duplicate line id {ln.id!r}", f"{p}.id")
            lids.add(ln.id)
            for end in ("from_bus", "to_bus"):
                if getattr(ln, end) not in seen:
                    raise DataError(f"unknown bus {getattr(ln, end)!r}", f"{p}.{end}")
            if ln.from_bus == ln.to_bus:
                raise DataError("line endpoints coincide", p)
            if not (ln.reactance > 0 and ln.flow_limit > 0):
                raise DataError("reactance and flow limit must be positive", p)
            if not ln.segments:
                raise DataError("line has no segments", f"{p}.segments")
            for j, sg in enumerate(ln.segments):
                if sg.id in sids:
                    raise DataError(f"duplicate segment id {sg.id!r}", f"{p}.segments[{j}].id")
                sids.add(sg.id)
                if not (sg.beta > 0 and sg.w0 > 0):
                    raise DataError("fragility parameters must be positive", f"{p}.segments[{j}]")
        for name in (self.name, *seen, *gids, *lids, *sids):
            if not name or any(ch.isspace() for ch in name):
                raise DataError(f"identifier {name!r} must be nonempty without whitespace")
        if self.horizon < 1:
            raise DataError("horizon must be >= 1", "horizon")
        if not self.is_connected():
            raise DataError("grid is not connected with all lines in service", "lines")
        return warnings


def great_circle_km(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, a)))


def split_span(line_id, lat1, lon1, lat2, lon2, beta, w0, max_len_km=20.0) -> tuple:
    """Cut a straight bus-to-bus span into equal segments no longer than ``max_len_km``.

    Each segment is located at its midpoint (linear interpolation in lat/lon).
    """
    length = great_circle_km(lat1, lon1, lat2, lon2)
    n = max(1, math.ceil(length / max_len_km - 1e-12))
    out = []
    for k in range(n):
        f = (k + 0.5) / n
        out.append(
            Segment(
                id=f"{line_id}.{k}",
                lat_deg=round(lat1 + f * (lat2 - lat1), 6),
                lon_deg=round(lon1 + f * (lon2 - lon1), 6),
                beta=beta,
                w0=w0,
            )
        )
    return tuple(out)
