"""Holland parametric hurricane wind field.

All angles are radians. Pressures are hPa at the interface and converted to
Pa internally; distances are km at the interface and converted to m.

The uncertain parameter vector (in this order) is::

    pc [hPa], rmax [km], b [-], lat [rad], lon [rad], speed [m/s], heading [rad]

Environmental pressure ``pn`` and air density ``rho`` are treated as known.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError, DomainError

EARTH_RADIUS_KM = 6371.0
OMEGA = 7.292e-5  # rad/s
PARAM_NAMES = ("pc", "rmax", "b", "lat", "lon", "speed", "heading")
N_PARAMS = len(PARAM_NAMES)

# absolute floors for the central-difference step, same order as PARAM_NAMES
FD_FLOORS = np.array([0.01, 0.01, 1e-4, 1e-6, 1e-6, 1e-3, 1e-4])
FD_REL = 1e-4

# targets closer than this to the eye are treated as the eye itself
_MIN_RANGE_KM = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    phi: float  # latitude, rad
    lam: float  # longitude, rad

    def __post_init__(self):
        if abs(self.phi) > math.pi / 2 + 1e-12 or abs(self.lam) > math.pi + 1e-12:
            raise DomainError(f"coordinates out of range: ({self.phi}, {self.lam})")

    @classmethod
    def from_degrees(cls, lat, lon):
        return cls(math.radians(lat), math.radians(lon))


@dataclass(frozen=True)
class HollandParams:
    pc: float
    rmax: float
    b: float
    lat: float
    lon: float
    speed: float
    heading: float
    pn: float = 1013.0
    rho: float = 1.15

    def __post_init__(self):
        if not self.pn >= self.pc:
            raise DomainError(f"central pressure {self.pc} exceeds environmental {self.pn}")
        if self.rmax <= 0 or self.b <= 0 or self.rho <= 0:
            raise DomainError("rmax, b and rho must be positive")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in PARAM_NAMES], dtype=float)

    def with_vector(self, theta) -> "HollandParams":
        return replace(self, **{k: float(v) for k, v in zip(PARAM_NAMES, theta)})

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)


def fd_steps(theta: np.ndarray) -> np.ndarray:
    return np.maximum(FD_REL * np.abs(theta), FD_FLOORS)


# --- vectorised kernels ---------------------------------------------------


def _haversine(phi1, lam1, phi2, lam2):
    dphi = phi2 - phi1
    dlam = lam2 - lam1
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _azimuth(phi1, lam1, phi2, lam2):
    dlam = lam2 - lam1
    y = np.sin(dlam) * np.cos(phi2)
    x = np.cos(phi1) * np.sin(phi2) - np.sin(phi1) * np.cos(phi2) * np.cos(dlam)
    theta = np.arctan2(y, x)
    return np.where(theta <= -math.pi, theta + 2 * math.pi, theta)


def _gradient_wind(pc, rmax, b, pn, rho, r_km, phi_local):
    r = r_km * 1000.0
    f = np.abs(2 * OMEGA * np.sin(phi_local))
    x = (rmax * 1000.0 / r) ** b
    dp = (pn - pc) * 100.0
    rf2 = r * f / 2
    vg = np.sqrt(b * dp / rho * np.exp(-x) * x + rf2**2) - rf2
    return np.maximum(vg, 0.0)


def _total_wind(theta, pn, rho, phi2, lam2):
    """Wind speed for parameter array ``theta`` (7, ...) at targets (phi2, lam2).

    Returns (speed, range_km); broadcasting follows numpy rules.
    """
    pc, rmax, b, phi1, lam1, s, alpha = theta
    r = _haversine(phi1, lam1, phi2, lam2)
    bearing = _azimuth(phi1, lam1, phi2, lam2)
    vg = _gradient_wind(pc, rmax, b, pn, rho, np.maximum(r, _MIN_RANGE_KM), phi2)
    # bearing is clockwise from north; the radial unit vector is
    # (sin, cos) in (east, north) and cyclonic flow is +90 deg from it,
    # counter-clockwise in the northern hemisphere
    hemi = np.where(phi1 >= 0, 1.0, -1.0)
    u = -hemi * vg * np.cos(bearing) + s * np.sin(alpha)
    v = hemi * vg * np.sin(bearing) + s * np.cos(alpha)
    return np.hypot(u, v), r


def _as_arrays(targets):
    if isinstance(targets, GeoPoint):
        return np.float64(targets.phi), np.float64(targets.lam)
    phi, lam = targets
    return np.asarray(phi, dtype=float), np.asarray(lam, dtype=float)


# --- public API -------------------------------------------------------------


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km (R = 6371 km)."""
    return float(_haversine(a.phi, a.lam, b.phi, b.lam))


def azimuth(center: GeoPoint, target: GeoPoint) -> float:
    """Bearing of ``target`` seen from ``center``, clockwise from north, in (-pi, pi]."""
    if center == target or haversine_distance(center, target) < _MIN_RANGE_KM:
        raise DegenerateGeometryError("azimuth undefined for coincident points")
    return float(_azimuth(center.phi, center.lam, target.phi, target.lam))


def gradient_wind_speed(p: HollandParams, r: float, phi_local: float) -> float:
    """Holland gradient wind (m/s) at range ``r`` km, Coriolis taken at ``phi_local``."""
    if not r > 0:
        raise DomainError(f"range must be positive, got {r}")
    return float(_gradient_wind(p.pc, p.rmax, p.b, p.pn, p.rho, r, phi_local))


def total_wind_speed(p: HollandParams, target: GeoPoint) -> float:
    """Surface wind speed (m/s): gradient wind plus storm translation."""
    speed, r = _total_wind(p.vector(), p.pn, p.rho, target.phi, target.lam)
    if r < _MIN_RANGE_KM:
        raise DegenerateGeometryError("target coincides with the storm center")
    return float(speed)


def wind_speed_field(p: HollandParams, phi, lam) -> np.ndarray:
    """Vectorised :func:`total_wind_speed` over arrays of target coordinates.

    Points at the eye get NaN instead of raising.
    """
    phi = np.asarray(phi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    speed, r = _total_wind(p.vector(), p.pn, p.rho, phi, lam)
    return np.where(r < _MIN_RANGE_KM, np.nan, speed)


def sensitivity_matrix(p: HollandParams, phi, lam, steps=None) -> np.ndarray:
    """Central-difference gradient of wind speed, shape (n_points, 7)."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    theta = p.vector()
    h = fd_steps(theta) if steps is None else np.asarray(steps, dtype=float)
    out = np.empty((phi.size, N_PARAMS))
    for k in range(N_PARAMS):
        up = theta.copy()
        dn = theta.copy()
        up[k] += h[k]
        dn[k] -= h[k]
        # keep Pc below Pn on the upper step
        if k == 0 and up[0] > p.pn:
            up[0] = p.pn
        f_up, _ = _total_wind(up[:, None], p.pn, p.rho, phi, lam)
        f_dn, _ = _total_wind(dn[:, None], p.pn, p.rho, phi, lam)
        out[:, k] = (f_up - f_dn) / (up[k] - dn[k])
    return out


def param_sensitivities(p: HollandParams, target: GeoPoint) -> np.ndarray:
    """dV_total/dtheta_k for the seven parameters at one target."""
    speed = total_wind_speed(p, target)
    if speed <= 0.0:
        raise DomainError("sensitivity undefined where the predicted wind is zero")
    return sensitivity_matrix(p, target.phi, target.lam)[0]


def linearity_deviation_field(p: HollandParams, phi, lam, delta) -> np.ndarray:
    """Relative error of the first-order prediction of a parameter perturbation.

    NaN where the linear predictor vanishes or at the eye.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    delta = np.asarray(delta, dtype=float)
    theta = p.vector()
    base, r = _total_wind(theta[:, None], p.pn, p.rho, phi, lam)
    moved, _ = _total_wind((theta + delta)[:, None], p.pn, p.rho, phi, lam)
    linear = sensitivity_matrix(p, phi, lam) @ delta
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.abs((moved - base - linear) / linear)
    bad = (linear == 0) | (r < _MIN_RANGE_KM)
    return np.where(bad, np.nan, dev)


def linearity_deviation(p: HollandParams, target: GeoPoint, delta) -> float:
    delta = np.asarray(delta, dtype=float)
    linear = float(param_sensitivities(p, target) @ delta)
    if linear == 0.0:
        raise DomainError("linear predictor is zero; deviation undefined")
    moved = total_wind_speed(p.with_vector(p.vector() + delta), target)
    base = total_wind_speed(p, target)
    return abs((moved - base - linear) / linear)


# --- track ------------------------------------------------------------------


@dataclass(frozen=True)
class TrackStep:
    """Forecast at one timestep. Angles kept in degrees as read from file."""

    pc: float
    rmax: float
    b: float
    lat_deg: float
    lon_deg: float
    speed: float
    heading_deg: float
    sigma_pc: float = 0.0
    sigma_rmax: float = 0.0
    sigma_b: float = 0.0
    sigma_lat_deg: float = 0.0
    sigma_lon_deg: float = 0.0
    sigma_speed: float = 0.0
    sigma_heading_deg: float = 0.0

    def holland(self, pn: float, rho: float) -> HollandParams:
        return HollandParams(
            pc=self.pc,
            rmax=self.rmax,
            b=self.b,
            lat=math.radians(self.lat_deg),
            lon=math.radians(self.lon_deg),
            speed=self.speed,
            heading=math.radians(self.heading_deg),
            pn=pn,
            rho=rho,
        )

    def sigma(self) -> np.ndarray:
        """Standard errors in model units (radians for angles)."""
        s = np.array(
            [
                self.sigma_pc,
                self.sigma_rmax,
                self.sigma_b,
                math.radians(self.sigma_lat_deg),
                math.radians(self.sigma_lon_deg),
                self.sigma_speed,
                math.radians(self.sigma_heading_deg),
            ]
        )
        if np.any(s < 0):
            raise DomainError("standard errors must be nonnegative")
        return s

    def scaled(self, factor: float) -> "TrackStep":
        """Copy with every standard error multiplied by ``factor``."""
        return replace(self, **{f: getattr(self, f) * factor for f in SIGMA_FIELDS})


SIGMA_FIELDS = (
    "sigma_pc",
    "sigma_rmax",
    "sigma_b",
    "sigma_lat_deg",
    "sigma_lon_deg",
    "sigma_speed",
    "sigma_heading_deg",
)


@dataclass(frozen=True)
class HurricaneTrack:
    steps: tuple = field(default_factory=tuple)
    pn: float = 1013.0
    rho: float = 1.15
    name: str = "track"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self):
        return len(self.steps)

    def params(self, t: int) -> HollandParams:
        return self.steps[t].holland(self.pn, self.rho)

    def sigma(self, t: int) -> np.ndarray:
        return self.steps[t].sigma()

    def scaled(self, factor: float) -> "HurricaneTrack":
        return replace(self, steps=tuple(s.scaled(factor) for s in self.steps))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.name, self.pn, self.rho)).encode())
        for s in self.steps:
            h.update(repr(s).encode())
        return h.hexdigest()[:16]


def harvey_like(pn: float = 1020.0, rho: float = 1.15) -> HollandParams:
    """Single-snapshot storm used for the linearization check."""
    return HollandParams(
        pc=975.0,
        rmax=50.0,
        b=1.3,
        lat=math.radians(22.3),
        lon=math.radians(-96.0),
        speed=5.0,
        heading=math.radians(-30.0),
        pn=pn,
        rho=rho,
    )


HARVEY_SIGMA = np.array([10.0, 5.0, 0.05, math.radians(0.1), math.radians(0.1), 0.5, math.radians(5.0)])


def mesh_around(center: GeoPoint, half_width_km: float = 250.0, n: int = 51):
    """Regular lat/lon mesh of ``n`` x ``n`` points spanning a square box (km)."""
    offs = np.linspace(-half_width_km, half_width_km, n)
    dlat = offs / EARTH_RADIUS_KM
    dlon = offs / (EARTH_RADIUS_KM * math.cos(center.phi))
    lat, lon = np.meshgrid(center.phi + dlat, center.lam + dlon, indexing="ij")
    return lat, lon


def points_array(points: Sequence[GeoPoint]):
    return (
        np.array([pt.phi for pt in points], dtype=float),
        np.array([pt.lam for pt in points], dtype=float),
    )


def linearity_mesh_study(p: HollandParams = None, sigma=None, half_width_km: float = 250.0, n: int = 51):
    """Deviation maps for +/-1 sigma single-parameter perturbations over a mesh.

    Returns (lat, lon, dev) with ``dev`` shaped (7, 2, n, n); axis 1 is the sign (-, +).
    """
    p = harvey_like() if p is None else p
    sigma = HARVEY_SIGMA if sigma is None else np.asarray(sigma, dtype=float)
    lat, lon = mesh_around(p.center, half_width_km, n)
    dev = np.empty((N_PARAMS, 2, n, n))
    for k in range(N_PARAMS):
        for j, sgn in enumerate((-1.0, 1.0)):
            d = np.zeros(N_PARAMS)
            d[k] = sgn * sigma[k]
            dev[k, j] = linearity_deviation_field(p, lat.ravel(), lon.ravel(), d).reshape(n, n)
    return lat, lon, dev


def fraction_below(dev, threshold: float = 0.1) -> float:
    """Share of defined cells (NaN excluded) below ``threshold``."""
    ok = ~np.isnan(dev)
    return float((dev[ok] < threshold).mean())
