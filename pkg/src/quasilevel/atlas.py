"""Sweeps over field directions: verdict atlas, stability zones, box dimension.

Directions come from a spherical Fibonacci lattice.  Each direction gets a
torus3 verdict; samples sharing an integer label are clustered into zones on
the 6-nearest-neighbour graph.  Results stream into a keyed cache so an
interrupted sweep picks up where it stopped.
"""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import io as qio
from .errors import DomainError, EmptyTarget
from .qp_core import TrigSeries
from .torus3 import canonical_sign, energy_interval, verdict

KNN = 6
RATIONAL_HEIGHT = 10
RATIONAL_TOL = 1e-9
NUDGE = 1e-6
SWEEP_RESOLUTION = 24
C_POLICIES = ("fixed", "symmetric", "interval")


class LowResolution(UserWarning):
    pass


def fibonacci_sphere(n):
    """n near-uniform unit vectors; deterministic."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def rational_direction(b, height=RATIONAL_HEIGHT, tol=RATIONAL_TOL):
    """Integer vector of sup-norm <= height within angle tol of b, else None."""
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    for q in range(1, height + 1):
        v = b / np.abs(b).max() * q
        m = np.rint(v)
        if np.abs(m).max() > height or not np.any(m):
            continue
        u = m / np.linalg.norm(m)
        if np.linalg.norm(np.cross(u, b)) < tol and u @ b > 0:
            return m.astype(np.int64)
    return None


def nudge_direction(b, eps=NUDGE):
    # deterministic perpendicular push off the rational direction
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    p = np.cross(b, [1.0, np.sqrt(2.0), np.sqrt(3.0)])
    if np.linalg.norm(p) < 1e-3:
        p = np.cross(b, [np.sqrt(5.0), 1.0, np.sqrt(7.0)])
    p /= np.linalg.norm(p)
    out = b + eps * p
    return out / np.linalg.norm(out)


@dataclass
class Sample:
    index: int
    direction: np.ndarray
    kind: str
    mu: tuple | None = None
    level: float = float("nan")
    c_lo: float = float("nan")
    c_hi: float = float("nan")
    nudged: bool = False
    error: str | None = None

    @property
    def label(self):
        return self.mu if self.kind == "StableTCI" else None

    def to_json(self):
        return {"index": self.index, "direction": [float(v) for v in self.direction], "kind": self.kind,
                "mu": None if self.mu is None else [int(v) for v in self.mu], "level": self.level,
                "c_lo": self.c_lo, "c_hi": self.c_hi, "nudged": self.nudged, "error": self.error}

    @classmethod
    def from_json(cls, d):
        nan = float("nan")
        f = lambda v: nan if v is None else float(v)
        return cls(int(d["index"]), np.array(d["direction"], dtype=float), d["kind"],
                   None if d["mu"] is None else tuple(int(v) for v in d["mu"]), f(d["level"]),
                   f(d["c_lo"]), f(d["c_hi"]), bool(d["nudged"]), d.get("error"))


@dataclass
class Zone:
    label: tuple
    members: np.ndarray
    interior: np.ndarray

    def to_json(self):
        return {"label": list(self.label), "members": [int(i) for i in self.members],
                "interior": [int(i) for i in self.interior]}


@dataclass
class ZoneMap:
    directions: np.ndarray
    samples: list
    zones: list = field(default_factory=list)
    complete: bool = True
    config: dict = field(default_factory=dict)

    @property
    def labels(self):
        return sorted({z.label for z in self.zones})

    def kinds(self):
        return np.array([s.kind for s in self.samples])

    def zone_of(self, index):
        for z in self.zones:
            if index in z.members:
                return z
        return None

    def label_near(self, b):
        """Label of the sample closest to direction b (None if not StableTCI)."""
        b = np.asarray(b, dtype=float)
        i = int(np.argmax(self.directions @ (b / np.linalg.norm(b))))
        return self.samples[i].label

    def tci_mask(self):
        return np.array([s.kind == "StableTCI" for s in self.samples])

    def to_json(self):
        return {"config": self.config, "complete": self.complete,
                "samples": [s.to_json() for s in self.samples], "zones": [z.to_json() for z in self.zones]}

    @classmethod
    def from_json(cls, d):
        samples = [Sample.from_json(s) for s in d["samples"]]
        zones = [Zone(tuple(z["label"]), np.array(z["members"], dtype=np.int64),
                      np.array(z["interior"], dtype=np.int64)) for z in d["zones"]]
        dirs = np.array([s.direction for s in samples]).reshape(-1, 3)
        return cls(dirs, samples, zones, d["complete"], d["config"])

    def same_verdicts(self, other):
        # through canonical JSON so that missing levels (NaN) compare equal
        return (qio.canonical_json([s.to_json() for s in self.samples])
                == qio.canonical_json([s.to_json() for s in other.samples]))


def _level_for(policy, c, f, B, resolution, tol):
    if policy == "symmetric":
        return 0.0, None
    if policy == "fixed":
        return float(c), None
    U = energy_interval(f, B, tol=tol, resolution=resolution)
    if U.kind == "empty":
        return float("nan"), U
    return 0.5 * (U.lo + U.hi), U


def classify_direction(f, b, index=0, c_policy="symmetric", c=0.0, resolution=SWEEP_RESOLUTION,
                       confirm=False, tol=1e-3):
    """One sample of a sweep; domain errors become a Skipped sample."""
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    nudged = rational_direction(b) is not None
    if nudged:
        b = nudge_direction(b)
    try:
        level, U = _level_for(c_policy, c, f, b, resolution, tol)
        lo, hi = (float("nan"), float("nan")) if U is None or U.kind == "empty" else (U.lo, U.hi)
        if U is not None and U.kind == "empty":
            return Sample(index, b, "NoOpenTrajectories", None, level, lo, hi, nudged)
        v = verdict(f, b, level, resolution=resolution, confirm=confirm)
        mu = None if v.mu is None else tuple(int(x) for x in canonical_sign(v.mu))
        return Sample(index, b, v.kind, mu, level, lo, hi, nudged)
    except DomainError as e:
        return Sample(index, b, "Skipped", None, float("nan"), nudged=nudged, error=f"{type(e).__name__}: {e}")


def knn_graph(directions, k=KNN):
    n = len(directions)
    k = min(k, n - 1)
    if k < 1:
        return coo_matrix((n, n)).tocsr()
    _, nb = cKDTree(directions).query(directions, k=k + 1)
    rows = np.repeat(np.arange(n), k)
    cols = nb[:, 1:].ravel()
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    return ((A + A.T) > 0).astype(np.int8)


def extract_zones(directions, samples, k=KNN):
    """Connected clusters of StableTCI samples with equal label on the kNN graph."""
    n = len(samples)
    A = knn_graph(directions, k).tocoo()
    lab = [s.label for s in samples]
    keep = np.array([lab[i] is not None and lab[i] == lab[j] for i, j in zip(A.row, A.col)], dtype=bool)
    G = coo_matrix((np.ones(keep.sum()), (A.row[keep], A.col[keep])), shape=(n, n))
    _, comp = connected_components(G, directed=False)
    adj = A.tocsr()
    zones = []
    seen = set()
    for i in range(n):
        if lab[i] is None or comp[i] in seen:
            continue
        seen.add(comp[i])
        members = np.flatnonzero(comp == comp[i])
        interior = np.array([m for m in members
                             if all(lab[j] == lab[i] for j in adj.indices[adj.indptr[m]:adj.indptr[m + 1]])],
                            dtype=np.int64)
        zones.append(Zone(lab[i], members, interior))
    return zones


def sweep(f: TrigSeries, c_policy="symmetric", sample_count=2000, c=0.0, resolution=SWEEP_RESOLUTION,
          threads=1, cache_dir=None, limit=None, confirm=False, tol=1e-3, directions=None):
    """Verdict for each sampled direction, clustered into zones.

    ``limit`` caps the number of newly computed samples (the rest stay missing
    and ``complete`` is False); a later call with the same arguments resumes
    from the cache.  Output never depends on thread count or visiting order.
    """
    if f.dimension != 3:
        raise ValueError("sweeps need a function on T^3")
    if c_policy not in C_POLICIES:
        raise ValueError(f"c_policy must be one of {C_POLICIES}")
    if directions is None:
        if sample_count < 100:
            raise ValueError("sample_count must be at least 100")
        directions = fibonacci_sphere(sample_count)
    directions = np.asarray(directions, dtype=float)
    cfg = {"op": "sweep", "f": f.to_json(), "c_policy": c_policy, "c": float(c) if c_policy == "fixed" else None,
           "n": len(directions), "directions": qio.config_hash(directions.tolist()),
           "resolution": int(resolution), "confirm": bool(confirm), "tol": float(tol)}
    chash = qio.config_hash(cfg)
    cache = qio.ResultCache(qio.default_cache_dir(cache_dir), chash, "sweep")

    todo = [i for i in range(len(directions)) if i not in cache]
    if limit is not None:
        todo = todo[:max(0, int(limit))]

    def work(i):
        t = time.perf_counter()
        s = classify_direction(f, directions[i], i, c_policy, c, resolution, confirm, tol)
        cache.put(i, s.to_json(), time.perf_counter() - t)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            for j in range(0, len(todo), 64):
                list(ex.map(work, todo[j:j + 64]))
                cache.commit()
    else:
        for j, i in enumerate(todo):
            work(i)
            if j % 64 == 63:
                cache.commit()
    cache.commit()

    samples = [Sample.from_json(cache.get(i)) if i in cache else
               Sample(i, directions[i], "Missing") for i in range(len(directions))]
    complete = all(s.kind != "Missing" for s in samples)
    zones = extract_zones(np.array([s.direction for s in samples]), samples) if complete else []
    return ZoneMap(np.array([s.direction for s in samples]), samples, zones, complete, cfg)


# ------------------------------------------------------------ box dimension ----

_FACES = [(0, 1, 2, 1), (0, 1, 2, -1), (1, 2, 0, 1), (1, 2, 0, -1), (2, 0, 1, 1), (2, 0, 1, -1)]


def cube_charts(points):
    """Gnomonic projection onto the six cube faces: (face id, u, v) in [-1, 1]^2."""
    P = np.asarray(points, dtype=float)
    ax = np.argmax(np.abs(P), axis=1)
    sgn = np.sign(P[np.arange(len(P)), ax])
    face = 2 * ax + (sgn < 0)
    d = np.abs(P[np.arange(len(P)), ax])
    uv = np.empty((len(P), 2))
    for a in range(3):
        sel = ax == a
        b, c = (a + 1) % 3, (a + 2) % 3
        uv[sel, 0] = P[sel, b] / d[sel]
        uv[sel, 1] = P[sel, c] / d[sel]
    return face.astype(np.int64), np.clip(uv, -1.0, 1.0 - 1e-12)


@dataclass
class DimensionEstimate:
    sizes: np.ndarray
    counts: np.ndarray
    alpha: float
    ci: tuple
    stderr: float
    n_samples: int
    low_resolution: bool = False

    def to_json(self):
        return {"sizes": [float(s) for s in self.sizes], "counts": [int(c) for c in self.counts],
                "alpha": self.alpha, "ci": list(self.ci), "stderr": self.stderr,
                "n_samples": self.n_samples, "low_resolution": self.low_resolution}


def box_counts(points, sizes):
    face, uv = cube_charts(points)
    out = []
    for s in sizes:
        k = int(np.ceil(2.0 / s))
        cells = np.floor((uv + 1.0) / s).astype(np.int64)
        out.append(len(np.unique((face * k + cells[:, 0]) * k + cells[:, 1])))
    return np.array(out, dtype=np.int64)


def box_dimension(target, mask=None, min_samples=10_000, coarsest=0, oversample=4.0, confidence=0.95):
    """Box-counting slope of a sampled subset of S^2.

    ``target`` is a ZoneMap (default subset: samples that are not StableTCI) or
    an (n, 3) array of sample directions with a boolean ``mask``.  Box sizes
    are dyadic in the cube-face charts, from 2^-coarsest down to the smallest
    size still ``oversample`` times the median nearest-neighbour spacing of
    the target.
    """
    if isinstance(target, ZoneMap):
        pts = target.directions
        if mask is None:
            mask = ~target.tci_mask() & np.array([s.kind not in ("Skipped", "Missing") for s in target.samples])
    else:
        pts = np.asarray(target, dtype=float)
        if mask is None:
            mask = np.ones(len(pts), dtype=bool)
    n = len(pts)
    low = n < min_samples
    if low:
        warnings.warn(f"{n} samples; box dimension below {min_samples} samples is not meaningful",
                      LowResolution, stacklevel=2)
    sel = pts[np.asarray(mask, dtype=bool)]
    if len(sel) < 2:
        raise EmptyTarget("no target samples")
    sel = sel / np.linalg.norm(sel, axis=1)[:, None]
    dnn = np.median(cKDTree(sel).query(sel, k=2)[0][:, 1])
    smin = max(oversample * dnn, 1e-6)
    sizes = []
    j = coarsest
    while 2.0 ** -j >= smin:
        sizes.append(2.0 ** -j)
        j += 1
    if len(sizes) < 3:
        raise EmptyTarget("target too sparse for three dyadic scales")
    sizes = np.array(sizes)
    counts = box_counts(sel, sizes)
    fit = stats.linregress(np.log(1.0 / sizes), np.log(counts))
    tq = stats.t.ppf(0.5 + confidence / 2, len(sizes) - 2) if len(sizes) > 2 else np.inf
    alpha = float(np.clip(fit.slope, 0.0, 2.0))
    ci = (float(fit.slope - tq * fit.stderr), float(fit.slope + tq * fit.stderr))
    return DimensionEstimate(sizes, counts, alpha, ci, float(fit.stderr), n, low)


def great_circle_band(points, normal, width=1e-3):
    points = np.asarray(points, dtype=float)
    nrm = np.asarray(normal, dtype=float)
    return np.abs(points @ (nrm / np.linalg.norm(nrm))) < width


# ------------------------------------------------------------ symmetric level ----

def symmetric_level_check(f: TrigSeries, p0=(0.5, 0.5, 0.5), n_random=1000, seed=0, tol=1e-10):
    """True iff f(p + p0) = -f(p) identically.

    Termwise, every coefficient must pick up the factor exp(2 pi i m.p0) = -1;
    the identity is also checked at random points.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (f.dimension,):
        raise ValueError("p0 must live on the same torus as f")
    phase = np.exp(2j * np.pi * (f.freqs @ p0))
    termwise = bool(np.all(np.abs(f.coeffs * (phase + 1.0)) < 1e-12 * max(1.0, f.abs_sum())))
    P = np.random.default_rng(seed).random((n_random, f.dimension))
    sampled = float(np.max(np.abs(f(P + p0) + f(P)))) < tol if len(f.coeffs) else True
    return termwise and sampled


__all__ = ["fibonacci_sphere", "rational_direction", "nudge_direction", "Sample", "Zone", "ZoneMap",
           "classify_direction", "knn_graph", "extract_zones", "sweep", "cube_charts", "box_counts",
           "DimensionEstimate", "box_dimension", "great_circle_band", "symmetric_level_check", "LowResolution"]
