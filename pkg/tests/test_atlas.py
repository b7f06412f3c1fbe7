import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilevel.atlas import (LowResolution, ZoneMap, box_dimension, classify_direction, extract_zones,
                              fibonacci_sphere, great_circle_band, knn_graph, nudge_direction, rational_direction,
                              sweep, symmetric_level_check)
from quasilevel.errors import EmptyTarget
from quasilevel.io import canonical_json
from quasilevel.qp_core import TrigSeries
from quasilevel.torus3 import energy_interval

COS3 = TrigSeries.cos_sum(3)
FLAT = TrigSeries.from_real(3, cos=[((0, 0, 1), 1.0)])


def test_fibonacci_sphere_unit_and_deterministic():
    P = fibonacci_sphere(500)
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
    assert np.array_equal(P, fibonacci_sphere(500))
    assert abs(P.mean(axis=0)).max() < 1e-2


def test_rational_direction_detected_and_nudged():
    b = np.array([1.0, 2.0, 3.0])
    assert tuple(rational_direction(b)) == (1, 2, 3)
    nb = nudge_direction(b)
    assert rational_direction(nb) is None
    assert np.arccos(np.clip(nb @ b / np.linalg.norm(b), -1, 1)) < 2e-6
    assert rational_direction([1.0, 2 ** 0.5, 3 ** 0.5]) is None


def test_rational_sample_is_marked():
    s = classify_direction(FLAT, [0.0, 0.0, 1.0], c_policy="fixed", c=0.5, resolution=16)
    assert s.nudged
    assert s.kind == "StableTCI" and s.mu == (0, 0, 1)


def test_flat_tori_single_label(tmp_path):
    zm = sweep(FLAT, "fixed", 120, c=0.5, resolution=16, cache_dir=tmp_path)
    assert zm.complete
    assert {s.label for s in zm.samples} == {(0, 0, 1)}
    assert zm.labels == [(0, 0, 1)]


@pytest.fixture(scope="module")
def small_sweep(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    return sweep(COS3, "symmetric", 200, resolution=16, cache_dir=d), d


def test_sweep_deterministic(small_sweep, tmp_path):
    zm, _ = small_sweep
    again = sweep(COS3, "symmetric", 200, resolution=16, cache_dir=tmp_path)
    assert zm.same_verdicts(again)
    assert [z.to_json() for z in zm.zones] == [z.to_json() for z in again.zones]


def test_sweep_thread_count_irrelevant(small_sweep, tmp_path):
    zm, _ = small_sweep
    par = sweep(COS3, "symmetric", 200, resolution=16, cache_dir=tmp_path, threads=3)
    assert zm.same_verdicts(par)


def test_sweep_order_independent(small_sweep, tmp_path):
    zm, _ = small_sweep
    perm = np.random.default_rng(5).permutation(200)
    other = sweep(COS3, "symmetric", directions=fibonacci_sphere(200)[perm], resolution=16, cache_dir=tmp_path)
    for k, i in enumerate(perm):
        a, b = zm.samples[i].to_json(), other.samples[k].to_json()
        a.pop("index"), b.pop("index")
        assert canonical_json(a) == canonical_json(b)


def test_sweep_resume(small_sweep, tmp_path):
    zm, _ = small_sweep
    part = sweep(COS3, "symmetric", 200, resolution=16, cache_dir=tmp_path, limit=100)
    assert not part.complete
    assert sum(s.kind == "Missing" for s in part.samples) == 100
    done = sweep(COS3, "symmetric", 200, resolution=16, cache_dir=tmp_path)
    assert done.complete and done.same_verdicts(zm)


def test_zone_invariants(small_sweep):
    zm, _ = small_sweep
    A = knn_graph(zm.directions).tocsr()
    for z in zm.zones:
        assert all(zm.samples[i].label == z.label for i in z.members)
        for i in z.interior:
            nb = A.indices[A.indptr[i]:A.indptr[i + 1]]
            assert all(zm.samples[j].label == z.label for j in nb)
    assert len(zm.labels) >= 3


def test_zonemap_json_roundtrip(small_sweep):
    zm, _ = small_sweep
    back = ZoneMap.from_json(zm.to_json())
    assert canonical_json(back.to_json()) == canonical_json(zm.to_json())


def test_labels_locally_rigid(small_sweep):
    zm, _ = small_sweep
    rng = np.random.default_rng(0)
    inner = [i for z in zm.zones for i in z.interior][:5]
    assert inner
    for i in inner:
        s = zm.samples[i]
        d = rng.normal(size=3)
        d -= (d @ s.direction) * s.direction
        b = s.direction + 1e-5 * d / np.linalg.norm(d)
        again = classify_direction(COS3, b, resolution=16)
        assert again.mu == s.mu


def test_symmetric_level_examples():
    assert symmetric_level_check(COS3, (0.5, 0.5, 0.5))
    assert not symmetric_level_check(COS3 + 0.1, (0.5, 0.5, 0.5))
    assert symmetric_level_check(TrigSeries.sin_sum(3), (0.5, 0.5, 0.5))
    assert not symmetric_level_check(COS3, (0.5, 0.0, 0.5))


def test_symmetric_implies_symmetric_interval(small_sweep):
    zm, _ = small_sweep
    for i in (3, 77, 151):
        U = energy_interval(COS3, zm.directions[i], tol=1e-3, resolution=16)
        if U.kind != "empty":
            assert abs(U.lo + U.hi) < 1e-3


def test_box_dimension_empty_target():
    P = fibonacci_sphere(1000)
    with pytest.raises(EmptyTarget):
        box_dimension(P, np.zeros(len(P), dtype=bool), min_samples=0)


def test_box_dimension_full_sphere():
    P = fibonacci_sphere(200_000)
    est = box_dimension(P)
    assert abs(est.alpha - 2.0) <= 0.1
    assert np.all(np.diff(est.counts) >= 0)
    assert not est.low_resolution


def test_box_dimension_great_circle():
    P = fibonacci_sphere(1_000_000)
    n = np.array([1.0, 2 ** 0.5, 3 ** 0.5])
    est = box_dimension(P, great_circle_band(P, n, 1e-3))
    assert abs(est.alpha - 1.0) <= 0.15


def test_box_dimension_warns_when_sparse():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        est = box_dimension(fibonacci_sphere(5000))
    assert any(issubclass(x.category, LowResolution) for x in w)
    assert est.low_resolution


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_box_dimension_bounded(seed):
    P = fibonacci_sphere(20_000)
    mask = np.random.default_rng(seed).random(len(P)) < 0.3
    est = box_dimension(P, mask, min_samples=0)
    assert 0.0 <= est.alpha <= 2.0
