import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurricane_sds import analysis, sampler
from hurricane_sds.errors import DomainError, MappingError
from hurricane_sds.grid import Bus, Generator, GridCase, Line, Segment, split_span
from hurricane_sds.sampler import (
    aggregate_line_states,
    classify_segments,
    sample_pool,
    sample_pool_sds,
    sample_pool_smc,
)
from hurricane_sds.windfield import HurricaneTrack, TrackStep


def _toy(n_lines=3, seg_km=20.0, sigma=(10.0, 4.0, 0.05, 0.1, 0.1, 0.5, 5.0), beta=0.15, w0=40.0, pc=960.0, horizon=3):
    """Parallel east-west lines just north of a storm moving north."""
    buses = [Bus("W", (10.0,) * horizon, (1e3,) * horizon, 29.5, -95.6), Bus("E", (10.0,) * horizon, (1e3,) * horizon, 29.5, -95.0)]
    lines = []
    for k in range(n_lines):
        lat = 29.4 + 0.1 * k
        segs = split_span(f"L{k}", lat, -95.6, lat, -95.0, beta, w0, seg_km)
        lines.append(Line(f"L{k}", "W", "E", 0.1, 100.0, segs))
    gen = Generator("G", "W", 10.0, 0.0, 0.0, 100.0, 0.0, 100.0, 100.0)
    grid = GridCase("toy", tuple(buses), (gen,), tuple(lines), horizon, "W")
    steps = [TrackStep(pc, 40.0, 1.4, 29.0 + 0.2 * t, -95.3, 5.0, 0.0, *sigma) for t in range(horizon)]
    return grid, HurricaneTrack(tuple(steps), pn=1010.0, rho=1.15)


# --- classification ---------------------------------------------------------------------


def test_calm_track_has_empty_relevance():
    grid, track = _toy(pc=1010.0)
    for t in range(grid.horizon):
        rel, rest = classify_segments(grid, track, t)
        assert rel == [] and len(rest) == len(grid.segments)


def test_eye_over_cluster_is_relevant():
    grid, track = _toy()
    rel, rest = classify_segments(grid, track, 2)
    ids = {s.id for s in grid.segments}
    assert set(rel) | set(rest) == ids and not set(rel) & set(rest)
    assert any(r.startswith("L1.") for r in rel)


def test_relevance_size_rises_then_falls(coastal12):
    sizes = [len(classify_segments(coastal12.grid, coastal12.track, t)[0]) for t in range(coastal12.grid.horizon)]
    peak = int(np.argmax(sizes))
    assert 0 < peak < len(sizes) - 1
    assert sizes[0] < sizes[peak] and sizes[-1] < sizes[peak]


def test_track_must_cover_horizon():
    grid, track = _toy()
    with pytest.raises(DomainError):
        classify_segments(grid, track, 5)
    with pytest.raises(DomainError):
        sample_pool_sds(grid, replace(track, steps=track.steps[:1]), 10, 0)


# --- pools ------------------------------------------------------------------------------


def test_zero_sigma_pools_identical():
    grid, track = _toy(sigma=(0.0,) * 7)
    a = sample_pool_sds(grid, track, 500, 3)
    b = sample_pool_smc(grid, track, 500, 3)
    assert a.ev_time.size > 0
    assert np.array_equal(a.segment_fail_time(), b.segment_fail_time())


def test_n_scenarios_must_be_positive():
    grid, track = _toy()
    with pytest.raises(DomainError):
        sample_pool_sds(grid, track, 0, 1)


def test_reproducible_across_workers():
    grid, track = _toy()
    a = sample_pool_sds(grid, track, 5000, 9, workers=1)
    b = sample_pool_sds(grid, track, 5000, 9, workers=4)
    c = sample_pool_sds(grid, track, 5000, 9)
    assert a.equals(b) and a.equals(c)
    assert not a.equals(sample_pool_sds(grid, track, 5000, 10))


def test_common_random_numbers_prefix_stable():
    grid, track = _toy()
    small = sample_pool_sds(grid, track, 100, 4).segment_fail_time()
    big = sample_pool_sds(grid, track, 3000, 4).segment_fail_time()
    assert np.array_equal(small, big[:100])


def test_persistence_and_nonfragile_exclusion(coastal12):
    pool = sample_pool_sds(coastal12.grid, coastal12.track, 2000, 5)
    u = pool.line_states()
    assert np.all(np.diff(u.astype(int), axis=2) <= 0)
    for s, g, t in zip(pool.ev_scenario, pool.ev_segment, pool.ev_time):
        assert pool.segment_ids[g] in pool.relevance[t]


def test_segment_marginals_agree():
    grid, track = _toy(seg_km=20.0)
    n = 10_000
    a = sample_pool_sds(grid, track, n, 1).segment_fail_time()
    b = sample_pool_smc(grid, track, n, 1).segment_fail_time()
    ok = 0
    total = 0
    for t in range(grid.horizon):
        pa = (a <= t).mean(axis=0)
        pb = (b <= t).mean(axis=0)
        p = (pa + pb) / 2
        se = np.sqrt(p * (1 - p) * 2 / n)
        ok += np.sum(np.abs(pa - pb) <= 3 * se + 1e-12)
        total += pa.size
    assert ok / total >= 0.99


def test_smc_co_located_segments_independent():
    grid, track = _toy()
    n = 10_000
    pool = sample_pool_smc(grid, track, n, 2)
    x = (pool.segment_fail_time() <= 1).astype(float)
    i, j = 0, 1  # adjacent segments of the same line
    if x[:, i].std() == 0 or x[:, j].std() == 0:
        pytest.skip("degenerate margin")
    assert abs(np.corrcoef(x[:, i], x[:, j])[0, 1]) < 4 / math.sqrt(n)


def test_sds_induces_positive_dependence():
    grid, track = _toy()
    pool = sample_pool_sds(grid, track, 10_000, 2)
    x = (pool.segment_fail_time() <= 1).astype(float)
    assert np.corrcoef(x[:, 0], x[:, 1])[0, 1] > 0.1


def test_sds_heavier_tail_than_smc():
    grid, track = _toy(n_lines=6, seg_km=999.0, sigma=(25.0, 2.0, 0.02, 0.03, 0.03, 0.3, 2.0))
    a = sample_pool_sds(grid, track, 10_000, 3).faulted_counts()[:, 1]
    b = sample_pool_smc(grid, track, 10_000, 3).faulted_counts()[:, 1]
    assert analysis.excess_kurtosis(a) > analysis.excess_kurtosis(b)


@settings(max_examples=8, deadline=None)
@given(st.integers(2, 6), st.floats(5.0, 30.0), st.integers(0, 1000))
def test_multi_segment_union_effect(n_seg, sd_pc, seed):
    # Positively associated Gaussians make "every segment survives" more
    # likely, so a joint sampler never fails a multi-segment line more often
    # than independent sampling (up to Monte Carlo noise).
    grid, track = _toy(n_lines=1, seg_km=60.0 / n_seg, sigma=(sd_pc, 2.0, 0.02, 0.02, 0.02, 0.2, 2.0))
    n = 4000
    a = sample_pool_sds(grid, track, n, seed)
    b = sample_pool_smc(grid, track, n, seed)
    fa = 1 - a.line_states()[:, 0, -1].mean()
    fb = 1 - b.line_states()[:, 0, -1].mean()
    p = (fa + fb) / 2
    se = math.sqrt(max(p * (1 - p), 1e-12) * 2 / n)
    assert fa <= fb + 3 * se


def test_single_segment_lines_equal_in_distribution():
    grid, track = _toy(n_lines=3, seg_km=999.0)
    n = 10_000
    a = sample_pool_sds(grid, track, n, 6)
    b = sample_pool_smc(grid, track, n, 6)
    frac, z = analysis.marginal_agreement(a, b)
    assert frac == 1.0


def test_scenario_view_and_counts():
    grid, track = _toy()
    pool = sample_pool_sds(grid, track, 200, 1)
    lft = pool.line_fail_time()
    for s in range(0, 200, 17):
        sc = pool.scenario(s)
        assert dict(sc.line_fail) == {pool.line_ids[k]: int(t) for k, t in enumerate(lft[s]) if t < pool.horizon}
        assert np.array_equal(pool.line_fail_time_row(s), lft[s])
    counts = pool.faulted_counts()
    assert np.array_equal(counts, (1 - pool.line_states()).sum(axis=1))


def test_unknown_kind():
    grid, track = _toy()
    with pytest.raises(ValueError):
        sample_pool(grid, track, 10, 0, kind="other")


# --- aggregation ------------------------------------------------------------------------


def test_aggregate_examples():
    seg_ids = ["a.0", "a.1", "b.0"]
    m = {"a.0": "a", "a.1": "a", "b.0": "b"}
    T = 7
    x = np.zeros((1, 3, T), dtype=np.uint8)
    assert aggregate_line_states(x, seg_ids, m, ["a", "b"]).all()
    x[0, 2, 3] = 1
    u = aggregate_line_states(x, seg_ids, m, ["a", "b"])
    assert u[0, 1].tolist() == [1, 1, 1, 0, 0, 0, 0]
    x[0, 0, 5] = 1
    x[0, 1, 2] = 1
    u = aggregate_line_states(x, seg_ids, m, ["a", "b"])
    assert u[0, 0].tolist() == [1, 1, 0, 0, 0, 0, 0]
    with pytest.raises(MappingError):
        aggregate_line_states(x, ["a.0", "zz", "b.0"], m, ["a", "b"])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 6), st.integers(0, 10**6))
def test_aggregate_matches_pool_logic(n, n_seg, T, seed):
    rng = np.random.default_rng(seed)
    x = (rng.random((n, n_seg, T)) < 0.2).astype(np.uint8)
    seg_ids = [f"s{i}" for i in range(n_seg)]
    line_of = {s: f"l{i % 2}" for i, s in enumerate(seg_ids)}
    lines = sorted(set(line_of.values()))
    u = aggregate_line_states(x, seg_ids, line_of, lines)
    for s in range(n):
        for k, lid in enumerate(lines):
            for t in range(T):
                hit = any(x[s, i, tt] for i, sid in enumerate(seg_ids) if line_of[sid] == lid for tt in range(t + 1))
                assert u[s, k, t] == (0 if hit else 1)
