"""Failure scenario pools: spatially dependent (relevance) and independent (normal) sampling.

Both samplers share the same per-timestep preparation (predicted intensity,
relevance classification, covariance) and the same random streams: the
standard normals and uniforms for scenario ``s`` at timestep ``t`` come from
a Philox generator keyed by ``(seed, t)`` at counter offset ``s``. The only
difference is how the normals are mapped to log-intensities: through the
Cholesky factor (relevance) or through the marginal standard deviations
(normal). Output therefore does not depend on chunking or worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .correlation import CholeskyFactor, build_covariance, cholesky_rank1
from .errors import DomainError, FactorizationError, MappingError
from .fragility import fragility_prob_array
from .grid import GridCase
from .windfield import HurricaneTrack, sensitivity_matrix, wind_speed_field

log = logging.getLogger(__name__)

SAMPLER_KINDS = ("relevance", "normal")
P_THRESHOLD = 1e-4
MIN_WIND = 0.1  # m/s; below this a segment is never sampled
CHUNK = 2048


@dataclass(frozen=True)
class Scenario:
    """Line outage times for one scenario; lines absent from ``line_fail`` never fail."""

    id: int
    line_fail: tuple = ()  # sorted (line_id, t_fail) pairs

    def fail_time(self, line_id, horizon):
        return dict(self.line_fail).get(line_id, horizon)

    def in_service(self, line_id, t) -> bool:
        return t < dict(self.line_fail).get(line_id, t + 1)

    def failed_lines(self) -> set:
        return {lid for lid, _ in self.line_fail}

    @classmethod
    def from_times(cls, sid, times: dict):
        return cls(int(sid), tuple(sorted((str(k), int(v)) for k, v in times.items())))


@dataclass
class ScenarioPool:
    sampler_kind: str
    seed: int
    n_scenarios: int
    horizon: int
    segment_ids: tuple
    line_ids: tuple
    segment_line: np.ndarray  # line index per segment
    # sparse failure events, sorted by (scenario, segment)
    ev_scenario: np.ndarray
    ev_segment: np.ndarray
    ev_time: np.ndarray
    relevance: tuple = ()  # per timestep: tuple of relevant segment ids
    track_hash: str = ""
    grid_hash: str = ""
    extra: dict = field(default_factory=dict)

    def segment_fail_time(self) -> np.ndarray:
        """(n, n_segments) first failure index; ``horizon`` means never."""
        out = np.full((self.n_scenarios, len(self.segment_ids)), self.horizon, dtype=np.int64)
        out[self.ev_scenario, self.ev_segment] = self.ev_time
        return out

    def line_fail_time(self) -> np.ndarray:
        out = np.full((self.n_scenarios, len(self.line_ids)), self.horizon, dtype=np.int64)
        np.minimum.at(out, (self.ev_scenario, self.segment_line[self.ev_segment]), self.ev_time)
        return out

    def line_states(self) -> np.ndarray:
        """(n, n_lines, T) array of u^L: 1 in service, 0 failed."""
        lft = self.line_fail_time()
        return (np.arange(self.horizon)[None, None, :] < lft[:, :, None]).astype(np.uint8)

    def faulted_counts(self) -> np.ndarray:
        """(n, T) number of failed lines per scenario and timestep."""
        lft = self.line_fail_time()
        return (lft[:, :, None] <= np.arange(self.horizon)[None, None, :]).sum(axis=1)

    def scenario(self, s: int) -> Scenario:
        lft = self.line_fail_time_row(s)
        times = {self.line_ids[k]: int(t) for k, t in enumerate(lft) if t < self.horizon}
        return Scenario.from_times(s, times)

    def line_fail_time_row(self, s: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.ev_scenario, [s, s + 1])
        out = np.full(len(self.line_ids), self.horizon, dtype=np.int64)
        np.minimum.at(out, self.segment_line[self.ev_segment[lo:hi]], self.ev_time[lo:hi])
        return out

    def header(self) -> dict:
        return dict(
            sampler_kind=self.sampler_kind,
            seed=self.seed,
            n=self.n_scenarios,
            horizon=self.horizon,
            track_hash=self.track_hash,
            grid_hash=self.grid_hash,
        )

    def equals(self, other: "ScenarioPool") -> bool:
        return (
            self.header() == other.header()
            and self.segment_ids == other.segment_ids
            and self.line_ids == other.line_ids
            and np.array_equal(self.segment_line, other.segment_line)
            and np.array_equal(self.ev_scenario, other.ev_scenario)
            and np.array_equal(self.ev_segment, other.ev_segment)
            and np.array_equal(self.ev_time, other.ev_time)
            and tuple(map(tuple, self.relevance)) == tuple(map(tuple, other.relevance))
        )


@dataclass(frozen=True)
class TimestepModel:
    """Everything needed to sample one timestep, shared read-only by workers."""

    t: int
    relevant: np.ndarray  # segment indices
    log_mean: np.ndarray
    log_w0: np.ndarray
    beta: np.ndarray
    chol: Optional[CholeskyFactor]
    marginal_sd: np.ndarray


# --- preparation ------------------------------------------------------------


def _segment_arrays(grid: GridCase):
    segs = grid.segments
    phi = np.radians([s.lat_deg for s in segs])
    lam = np.radians([s.lon_deg for s in segs])
    beta = np.array([s.beta for s in segs])
    w0 = np.array([s.w0 for s in segs])
    return phi, lam, beta, w0


def predicted_intensity(grid: GridCase, track: HurricaneTrack, t: int) -> np.ndarray:
    phi, lam, _, _ = _segment_arrays(grid)
    w = wind_speed_field(track.params(t), phi, lam)
    return np.nan_to_num(w, nan=0.0)


def _relevant_mask(grid, track, t, p_threshold):
    if not 0 <= t < len(track):
        raise DomainError(f"track does not cover timestep {t}")
    _, _, beta, w0 = _segment_arrays(grid)
    w = predicted_intensity(grid, track, t)
    prob = fragility_prob_array(beta, w0, w)
    return (w >= MIN_WIND) & (prob >= p_threshold), w


def classify_segments(grid: GridCase, track: HurricaneTrack, t: int, p_threshold=P_THRESHOLD):
    """Split segment ids into (relevance set, non-fragile set) at timestep ``t``."""
    mask, _ = _relevant_mask(grid, track, t, p_threshold)
    ids = [s.id for s in grid.segments]
    rel = [i for i, m in zip(ids, mask) if m]
    rest = [i for i, m in zip(ids, mask) if not m]
    return rel, rest


def prepare_timestep(grid, track, t, p_threshold=P_THRESHOLD, param_cov=None, with_chol=True) -> TimestepModel:
    mask, w = _relevant_mask(grid, track, t, p_threshold)
    phi, lam, beta, w0 = _segment_arrays(grid)
    idx = np.flatnonzero(mask)
    wbar = w[idx]
    if idx.size == 0:
        empty = np.empty(0)
        return TimestepModel(t, idx, empty, empty, empty, None, empty)
    params = track.params(t)
    V = sensitivity_matrix(params, phi[idx], lam[idx]) / wbar[:, None]
    if param_cov is not None:
        cf = build_covariance(V, param_cov=np.asarray(param_cov)[t] if np.ndim(param_cov) == 3 else param_cov)
    else:
        cf = build_covariance(V, sigma=track.sigma(t))
    chol = None
    if with_chol:
        try:
            chol = cholesky_rank1(cf)
        except FactorizationError as exc:
            raise FactorizationError(f"timestep {t}: {exc}") from exc
    return TimestepModel(
        t=t,
        relevant=idx,
        log_mean=np.log(wbar),
        log_w0=np.log(w0[idx]),
        beta=beta[idx],
        chol=chol,
        marginal_sd=np.sqrt(cf.diag()),
    )


# --- random streams -----------------------------------------------------------


def _timestep_key(seed: int, t: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(t)]).generate_state(2, np.uint64)


def draw_block(seed, t, s0, s1, dim):
    """Standard normals and uniforms (each (s1-s0, dim)) for scenarios s0..s1-1."""
    key = _timestep_key(seed, t)
    z = np.empty((s1 - s0, dim))
    r = np.empty((s1 - s0, dim))
    for j, s in enumerate(range(s0, s1)):
        g = np.random.Generator(np.random.Philox(key=key, counter=[0, s, 0, 0]))
        z[j] = g.standard_normal(dim)
        r[j] = g.random(dim)
    return z, r


def _sample_chunk(models, kind, seed, s0, s1, n_seg, horizon):
    fail = np.full((s1 - s0, n_seg), horizon, dtype=np.int64)
    for m in models:
        dim = m.relevant.size
        if dim == 0:
            continue
        z, r = draw_block(seed, m.t, s0, s1, dim)
        if not m.marginal_sd.any():
            # no forecast uncertainty; skip the ridge noise so both kinds agree
            lnw = np.broadcast_to(m.log_mean, z.shape)
        elif kind == "relevance":
            lnw = m.log_mean + z @ m.chol.L.T
        else:
            lnw = m.log_mean + z * m.marginal_sd
        x = r < ndtr((lnw - m.log_w0) / m.beta)
        block = fail[:, m.relevant]
        fail[:, m.relevant] = np.where(x & (block > m.t), m.t, block)
    return fail


def sample_pool(
    grid: GridCase,
    track: HurricaneTrack,
    n_scenarios: int,
    seed: int,
    kind: str = "relevance",
    p_threshold: float = P_THRESHOLD,
    workers: int = 1,
    param_cov=None,
) -> ScenarioPool:
    if kind not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler kind {kind!r}")
    if n_scenarios < 1:
        raise DomainError("n_scenarios must be >= 1")
    horizon = grid.horizon
    if len(track) < horizon:
        raise DomainError(f"track has {len(track)} steps, grid horizon is {horizon}")
    models = [
        prepare_timestep(grid, track, t, p_threshold, param_cov, with_chol=(kind == "relevance"))
        for t in range(horizon)
    ]
    n_seg = len(grid.segments)
    bounds = [(s, min(s + CHUNK, n_scenarios)) for s in range(0, n_scenarios, CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: _sample_chunk(models, kind, seed, *b, n_seg, horizon), bounds))
    else:
        parts = [_sample_chunk(models, kind, seed, *b, n_seg, horizon) for b in bounds]
    fail = np.concatenate(parts, axis=0)
    sc, sg = np.nonzero(fail < horizon)
    seg_ids = tuple(s.id for s in grid.segments)
    pool = ScenarioPool(
        sampler_kind=kind,
        seed=int(seed),
        n_scenarios=int(n_scenarios),
        horizon=horizon,
        segment_ids=seg_ids,
        line_ids=tuple(ln.id for ln in grid.lines),
        segment_line=grid.segment_line_index(),
        ev_scenario=sc.astype(np.int64),
        ev_segment=sg.astype(np.int64),
        ev_time=fail[sc, sg].astype(np.int64),
        relevance=tuple(tuple(seg_ids[i] for i in m.relevant) for m in models),
        track_hash=track.digest(),
        grid_hash=grid.digest(),
    )
    log.info("%s pool: %d scenarios, %d failure events", kind, n_scenarios, sc.size)
    return pool


def sample_pool_sds(grid, track, n_scenarios, seed, **kw) -> ScenarioPool:
    """Spatially dependent sampling: joint lognormal intensities per timestep."""
    return sample_pool(grid, track, n_scenarios, seed, kind="relevance", **kw)


def sample_pool_smc(grid, track, n_scenarios, seed, **kw) -> ScenarioPool:
    """Independent sampling from each segment's marginal lognormal intensity."""
    return sample_pool(grid, track, n_scenarios, seed, kind="normal", **kw)


def aggregate_line_states(segment_failures, segment_ids, segment_to_line: dict, line_ids) -> np.ndarray:
    """Persistent line states from per-timestep segment failures.

    ``segment_failures`` is (n_scenarios, n_segments, T) with 1 where the
    segment is failed in that interval. Returns u^L of shape
    (n_scenarios, n_lines, T): 1 iff no segment of the line failed at or
    before t.
    """
    x = np.asarray(segment_failures).astype(bool)
    lidx = {lid: k for k, lid in enumerate(line_ids)}
    try:
        seg_line = np.array([lidx[segment_to_line[sid]] for sid in segment_ids], dtype=np.int64)
    except KeyError as exc:
        raise MappingError(f"segment or line not in mapping: {exc.args[0]!r}") from None
    n, _, T = x.shape
    hit = np.maximum.accumulate(x, axis=2)
    failed = np.zeros((n, len(line_ids), T), dtype=bool)
    for k in range(len(line_ids)):
        cols = seg_line == k
        if cols.any():
            failed[:, k, :] = hit[:, cols, :].any(axis=1)
    return (~failed).astype(np.uint8)
