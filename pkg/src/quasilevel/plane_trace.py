"""Restriction to affine 2-planes, level-line tracing and asymptotic fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from . import kernels
from .errors import NearCriticalLevel, TooShort
from .qp_core import AffineEmbedding, QuasiperiodicFunction, TrigSeries, critical_points

TRACE_TOL = 1e-8
CRIT_TOL = 1e-6
DEFAULT_R = 32.0
DEFAULT_H = 1.0 / 64
STABILITY = 0.10


@dataclass(frozen=True, eq=False)
class PlaneSlice:
    """Affine plane {x : B x = a} in R^n with an orthonormal frame of ker B."""

    covectors: np.ndarray
    values: np.ndarray
    frame: np.ndarray
    base: np.ndarray

    @classmethod
    def from_covectors(cls, B, a, frame=None):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if B.shape[0] != B.shape[1] - 2:
            raise ValueError("need n-2 covectors in R^n")
        if np.linalg.matrix_rank(B) != B.shape[0]:
            raise ValueError("covectors must be linearly independent")
        if frame is None:
            frame = plane_frame(B)
        base = np.linalg.pinv(B) @ a
        return cls(B, a, np.asarray(frame, dtype=float), base)

    @property
    def ambient(self):
        return self.covectors.shape[1]

    def __post_init__(self):
        E = np.asarray(self.frame)
        if np.max(np.abs(np.asarray(self.covectors) @ E.T)) > 1e-12:
            raise ValueError("frame must lie in ker B")

    def embed(self, Y):
        return np.atleast_2d(Y) @ self.frame + self.base

    def embedding(self):
        return AffineEmbedding(self.frame.T, self.base)


def plane_frame(B):
    """Orthonormal basis (rows) of ker B with a deterministic orientation.

    For a single covector in R^3 the frame (e1, e2) satisfies e1 x e2 = B/|B|.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape == (1, 3):
        b = B[0] / np.linalg.norm(B[0])
        ref = np.eye(3)[np.argmin(np.abs(b))]
        e1 = np.cross(b, ref)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(b, e1)
        return np.vstack([e1, e2])
    E = null_space(B).T
    for r in range(E.shape[0]):
        piv = np.argmax(np.abs(E[r]) > 1e-12)
        if E[r, piv] < 0:
            E[r] = -E[r]
    return E


def slice_function(f: TrigSeries, slice: PlaneSlice) -> QuasiperiodicFunction:
    if slice.ambient != f.dimension:
        raise ValueError("slice and series dimensions differ")
    return QuasiperiodicFunction(f, slice.embedding())


@dataclass(eq=False)
class Trajectory:
    level: float
    vertices: np.ndarray
    closed: bool
    hit_boundary: bool
    exhausted: bool = False

    def __len__(self):
        return len(self.vertices)

    def length(self):
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def diameter(self):
        v = self.vertices
        if len(v) < 2:
            return 0.0
        from scipy.spatial import ConvexHull
        try:
            hv = v[ConvexHull(v).vertices]
        except Exception:
            hv = v
        d = hv[:, None, :] - hv[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def to_json(self):
        return {"level": self.level, "vertices": self.vertices.tolist(), "closed": self.closed,
                "hit_boundary": self.hit_boundary, "exhausted": self.exhausted}

    @classmethod
    def from_json(cls, d):
        return cls(float(d["level"]), np.asarray(d["vertices"], dtype=float).reshape(-1, 2),
                   bool(d["closed"]), bool(d["hit_boundary"]), bool(d.get("exhausted", False)))


# -------------------------------------------------------------- tracing ----

def _grid(qp2, cx, cy, R, h):
    j0 = int(np.floor((cx - R) / h))
    j1 = int(np.ceil((cx + R) / h))
    i0 = int(np.floor((cy - R) / h))
    i1 = int(np.ceil((cy + R) / h))
    xs = np.arange(j0, j1 + 1) * h
    ys = np.arange(i0, i1 + 1) * h
    return xs, ys


def check_regular(qp2, c, cells_xy, h, tol=CRIT_TOL):
    """Raise NearCriticalLevel if a critical point of phi at level ~c sits in the given cells."""
    if not len(cells_xy):
        return
    K, ph, cr, ci = qp2._arrays
    hb = float((np.abs(cr) + np.abs(ci)) @ (2 * np.pi * np.linalg.norm(K, axis=1)) ** 2)
    G = qp2.gradients(cells_xy)
    Y = cells_xy[np.linalg.norm(G, axis=1) < hb * h]
    if not len(Y):
        return
    # batched Newton on grad phi, steps capped at h
    X = Y.copy()
    for _ in range(30):
        g = qp2.gradients(X)
        H = qp2.hessians(X)
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        ok = np.abs(det) > 1e-300
        dx = np.zeros_like(X)
        sd = np.where(ok, det, 1.0)
        dx[:, 0] = (H[:, 1, 1] * g[:, 0] - H[:, 0, 1] * g[:, 1]) / sd
        dx[:, 1] = (H[:, 0, 0] * g[:, 1] - H[:, 1, 0] * g[:, 0]) / sd
        dx[~ok] = 0.0
        nrm = np.linalg.norm(dx, axis=1)
        dx *= np.minimum(1.0, h / np.maximum(nrm, 1e-300))[:, None]
        X = X - dx
        if np.all(nrm < 1e-14):
            break
    near = np.max(np.abs(X - Y), axis=1) <= 2 * h
    bad = near & (np.linalg.norm(qp2.gradients(X), axis=1) < tol) & (np.abs(qp2.values(X) - c) < tol)
    if bad.any():
        x = X[np.argmax(bad)]
        raise NearCriticalLevel(f"critical point at level {c} near {x}", point=x, value=float(qp2.values(x[None])[0]))


def trace_level(qp2: QuasiperiodicFunction, c, R=DEFAULT_R, h=DEFAULT_H, centre=(0.0, 0.0), check=True):
    """All components of {phi = c} meeting the square window |y - centre|_inf <= R."""
    if R <= 0 or h > R / 16:
        raise ValueError("need R > 0 and h <= R/16")
    if qp2.k != 2:
        raise ValueError("trace_level needs a function on the plane")
    cx, cy = map(float, centre)
    xs, ys = _grid(qp2, cx, cy, R, h)
    nx, ny = len(xs), len(ys)
    XX, YY = np.meshgrid(xs, ys)
    F = (qp2.values(np.column_stack([XX.ravel(), YY.ravel()])) - c).reshape(ny, nx)
    Fc = (qp2.values(np.column_stack([(XX[:-1, :-1] + h / 2).ravel(), (YY[:-1, :-1] + h / 2).ravel()])) - c
          ).reshape(ny - 1, nx - 1)
    seg = marching_squares(F, Fc)
    if check and len(seg):
        cells = np.unique(seg[:, 0] // 2)
        ci_, cj_ = np.divmod(cells, nx)
        ok = (ci_ < ny - 1) & (cj_ < nx - 1)
        check_regular(qp2, c, np.column_stack([xs[cj_[ok]] + h / 2, ys[ci_[ok]] + h / 2]), h)
    return _assemble(qp2, c, seg, xs, ys)


def marching_squares(F, Fc):
    return kernels.marching_squares_jit(np.ascontiguousarray(F), np.ascontiguousarray(Fc))


def _edge_endpoints(ids, xs, ys):
    nx = len(xs)
    q = ids // 2
    i, j = np.divmod(q, nx)
    vert = (ids % 2).astype(bool)
    P0 = np.column_stack([xs[j], ys[i]])
    P1 = np.column_stack([np.where(vert, xs[j], xs[np.minimum(j + 1, nx - 1)]),
                          np.where(vert, ys[np.minimum(i + 1, len(ys) - 1)], ys[i])])
    return P0, P1


def _assemble(qp2, c, seg, xs, ys):
    if not len(seg):
        return []
    ids, inv = np.unique(seg, return_inverse=True)
    inv = inv.reshape(seg.shape)
    P0, P1 = _edge_endpoints(ids, xs, ys)
    K, ph, cr, ci = qp2._arrays
    t = kernels.bisect_segments(K, ph, cr, ci, P0, P1, c)
    pts = P0 + t[:, None] * (P1 - P0)
    nxt = -np.ones(len(ids), dtype=np.int64)
    has_prev = np.zeros(len(ids), dtype=bool)
    nxt[inv[:, 0]] = inv[:, 1]
    has_prev[inv[:, 1]] = True
    order, starts, closed = kernels.chain_segments_jit(nxt, has_prev)
    out = []
    for q in range(len(closed)):
        nodes = order[starts[q]:starts[q + 1]]
        v = pts[nodes]
        if closed[q]:
            v = np.vstack([v, v[:1]])
        out.append(Trajectory(float(c), v, bool(closed[q]), not bool(closed[q])))
    return out


def trace_through(qp2: QuasiperiodicFunction, c, seed, R=100.0, h=DEFAULT_H, max_steps=2_000_000, centre=None):
    """Follow the single component of {phi = c} passing nearest to ``seed``.

    Uses the lazy cell walker, so the window may be far larger than a dense
    grid would allow.  Walks forward and backward until leaving the box of
    half-width R around ``centre`` (default: the seed) or closing up.
    """
    seed = np.asarray(seed, dtype=float)
    centre = seed if centre is None else np.asarray(centre, dtype=float)
    K, ph, cr, ci = qp2._arrays
    i0, j0, s0 = _seed_cell(qp2, c, seed, h)
    pts, closed, hit, exhausted = kernels.walk_level_jit(K, ph, cr, ci, float(c), float(h), i0, j0, s0,
                                                          float(centre[0]), float(centre[1]), float(R),
                                                          int(max_steps), 48)
    return Trajectory(float(c), np.asarray(pts), bool(closed), bool(hit), bool(exhausted))


def _seed_cell(qp2, c, seed, h):
    ci0 = int(np.floor(seed[1] / h))
    cj0 = int(np.floor(seed[0] / h))
    best = None
    for r in range(0, 8):
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                if max(abs(di), abs(dj)) != r:
                    continue
                i, j = ci0 + di, cj0 + dj
                corners = np.array([[j, i], [j + 1, i], [j + 1, i + 1], [j, i + 1], [j + 0.5, i + 0.5]]) * h
                v = qp2.values(corners) - c
                buf = np.empty((2, 2), dtype=np.int64)
                k = kernels.cell_segments(v[0], v[1], v[2], v[3], v[4], buf)
                for s in range(k):
                    d = np.hypot((j + 0.5) * h - seed[0], (i + 0.5) * h - seed[1])
                    if best is None or d < best[0]:
                        best = (d, i, j, s)
        if best is not None:
            return best[1], best[2], best[3]
    raise ValueError("seed is not near the level set")


# ------------------------------------------------------ asymptotic fits ----

@dataclass
class AsymptoticFit:
    kind: str
    direction: np.ndarray | None = None
    deviation_sup: float = float("nan")
    growth_exponent: float = float("nan")
    diameter: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return {"kind": self.kind,
                "direction": None if self.direction is None else [float(v) for v in self.direction],
                "deviation_sup": self.deviation_sup, "growth_exponent": self.growth_exponent,
                "diameter": self.diameter}


def _arclength(v):
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(v, axis=0), axis=1))])


def line_fit(v):
    """Total least squares line (centroid, unit direction oriented first->last)."""
    ctr = v.mean(axis=0)
    _, _, Vt = np.linalg.svd(v - ctr, full_matrices=False)
    d = Vt[0]
    if np.dot(v[-1] - v[0], d) < 0:
        d = -d
    return ctr, d


def strip_halfwidth(v):
    """Half the width of the thinnest strip parallel to the fitted line that contains v."""
    ctr, d = line_fit(v)
    nrm = np.array([-d[1], d[0]])
    s = (v - ctr) @ nrm
    return 0.5 * float(s.max() - s.min()), d


def _central(v, s, frac):
    L = s[-1]
    lo, hi = 0.5 * L * (1 - frac), 0.5 * L * (1 + frac)
    return v[(s >= lo) & (s <= hi)]


def classify_and_fit(traj: Trajectory, R=None, retrace: Trajectory | None = None, threshold=STABILITY):
    """Compact / OpenStrong / OpenWeak / Undetermined.

    The open test compares the strip half-width of the central half of the
    curve against the whole curve (or the whole curve against ``retrace`` of
    doubled length when given).  Stable within ``threshold`` means OpenStrong.
    """
    v = np.asarray(traj.vertices)
    if len(v) < 16:
        raise TooShort(f"{len(v)} vertices, need at least 16")
    if traj.closed:
        return AsymptoticFit("Compact", diameter=traj.diameter())
    s = _arclength(v)
    if retrace is not None:
        w1, d = strip_halfwidth(v)
        w2, d2 = strip_halfwidth(np.asarray(retrace.vertices))
        d = d2
    else:
        w2, d = strip_halfwidth(v)
        w1, _ = strip_halfwidth(_central(v, s, 0.5))
    floor = 1e-9
    stable = abs(w2 - w1) <= threshold * max(w2, floor) or w2 < floor
    fracs = [1 / 8, 1 / 4, 1 / 2, 1.0]
    Ls, Ws = [], []
    for fr in fracs:
        piece = _central(v, s, fr)
        if len(piece) >= 8:
            Ls.append(fr * s[-1])
            Ws.append(max(strip_halfwidth(piece)[0], floor))
    growth = float(np.polyfit(np.log(Ls), np.log(Ws), 1)[0]) if len(Ls) >= 3 else float("nan")
    if stable:
        return AsymptoticFit("OpenStrong", d, max(w1, w2), growth)
    ratio = np.array(Ws) / np.array(Ls)
    if np.isfinite(growth) and growth < 0.9 and ratio[-1] < ratio[0] and ratio[-1] < 0.25:
        return AsymptoticFit("OpenWeak", d, max(w1, w2), growth)
    return AsymptoticFit("Undetermined", d, max(w1, w2), growth)


# ------------------------------------------------------ compact diameters ----

@dataclass
class CompactSupReport:
    sup: float
    sup_doubled: float
    stable: bool
    skipped: list
    per_offset: list


def compact_diameter_sup(f: TrigSeries, covectors, c, offsets, R=4.0, h=1.0 / 32, frame=None, threshold=STABILITY):
    """Largest compact trajectory over the given plane offsets, at R and at 2R."""
    sups = []
    skipped = []
    per = []
    for a in offsets:
        sl = PlaneSlice.from_covectors(covectors, a, frame)
        qp2 = slice_function(f, sl)
        try:
            row = []
            for RR in (R, 2 * R):
                trajs = trace_level(qp2, c, RR, h)
                row.append(max([t.diameter() for t in trajs if t.closed
                                and np.max(np.abs(t.vertices)) < RR - 2] + [0.0]))
            per.append(row)
        except NearCriticalLevel as e:
            skipped.append((np.asarray(a).tolist(), str(e)))
    if not per:
        return CompactSupReport(float("nan"), float("nan"), False, skipped, per)
    arr = np.array(per)
    s1, s2 = float(arr[:, 0].max()), float(arr[:, 1].max())
    stable = s2 <= s1 * (1 + threshold) + 1e-12
    return CompactSupReport(s1, s2, bool(stable), skipped, per)


# -------------------------------------------------------- level sets on T^2 ----

def torus2_level_classes(f: TrigSeries, c, N=256, check=True):
    """Homology classes of the components of {f = c} on T^2.

    Each closed curve gamma oriented with {f > c} on its left is reported by
    its flux covector (int dx2, -int dx1): curves winding once around the
    x2-circle give +-(1, 0).  This mirrors the H_2(T^3) convention used for
    level surfaces (class = integral of the normal-type forms).
    """
    if f.dimension != 2:
        raise ValueError("need a series on T^2")
    if check:
        P, vals, _ = critical_points(f)
        if len(vals) and np.min(np.abs(vals - c)) < CRIT_TOL:
            raise NearCriticalLevel(f"level {c} is critical", point=P[np.argmin(np.abs(vals - c))],
                                    value=float(vals[np.argmin(np.abs(vals - c))]))
    ax = np.arange(N) / N
    XX, YY = np.meshgrid(ax, ax)
    F = (f(np.column_stack([XX.ravel(), YY.ravel()])) - c).reshape(N, N)
    Fc = (f(np.column_stack([XX.ravel() + 0.5 / N, YY.ravel() + 0.5 / N])) - c).reshape(N, N)
    seg = kernels.marching_squares_periodic_jit(np.ascontiguousarray(F), np.ascontiguousarray(Fc))
    if not len(seg):
        return []
    ids, inv = np.unique(seg, return_inverse=True)
    inv = inv.reshape(seg.shape)
    q = ids // 2
    i, j = np.divmod(q, N)
    vert = (ids % 2).astype(bool)
    P0 = np.column_stack([j / N, i / N])
    P1 = P0 + np.where(vert[:, None], [0.0, 1.0 / N], [1.0 / N, 0.0])
    K, ph, cr, ci = f.kernel_arrays()
    t = kernels.bisect_segments(K, ph, cr, ci, P0, P1, c)
    pts = P0 + t[:, None] * (P1 - P0)
    return _loop_classes(ids, inv, pts)


def grid_level_classes(G, c):
    """Classes of the components of {F = c} for F sampled on a periodic N x N grid.

    ``G[i, j] = F(j / N, i / N)``.  Crossings are placed by linear interpolation
    and the same flux convention as :func:`torus2_level_classes` is used.
    """
    G = np.asarray(G, dtype=float) - c
    N = G.shape[0]
    if G.shape != (N, N):
        raise ValueError("need a square periodic grid")
    G = np.where(G == 0.0, 1e-300, G)
    Gc = 0.25 * (G + np.roll(G, -1, 0) + np.roll(G, -1, 1) + np.roll(np.roll(G, -1, 0), -1, 1))
    seg = kernels.marching_squares_periodic_jit(np.ascontiguousarray(G), np.ascontiguousarray(Gc))
    if not len(seg):
        return []
    ids, inv = np.unique(seg, return_inverse=True)
    inv = inv.reshape(seg.shape)
    q = ids // 2
    i, j = np.divmod(q, N)
    vert = (ids % 2).astype(bool)
    g0 = G[i, j]
    g1 = np.where(vert, G[(i + 1) % N, j], G[i, (j + 1) % N])
    t = g0 / (g0 - g1)
    pts = np.column_stack([j / N, i / N]) + t[:, None] * np.where(vert[:, None], [0.0, 1.0 / N], [1.0 / N, 0.0])
    return _loop_classes(ids, inv, pts)


def _loop_classes(ids, inv, pts):
    nxt = -np.ones(len(ids), dtype=np.int64)
    has_prev = np.zeros(len(ids), dtype=bool)
    nxt[inv[:, 0]] = inv[:, 1]
    has_prev[inv[:, 1]] = True
    order, starts, closed = kernels.chain_segments_jit(nxt, has_prev)
    classes = []
    for r in range(len(closed)):
        nodes = order[starts[r]:starts[r + 1]]
        loop = pts[np.append(nodes, nodes[0])]
        d = np.diff(loop, axis=0)
        d -= np.round(d)
        w = np.round(d.sum(0)).astype(int)
        classes.append((int(w[1]), int(-w[0])))
    return classes


__all__ = [
    "grid_level_classes", "PlaneSlice", "plane_frame", "slice_function", "Trajectory", "AsymptoticFit", "trace_level",
    "trace_through", "classify_and_fit", "compact_diameter_sup", "CompactSupReport",
    "torus2_level_classes", "line_fit", "strip_halfwidth", "check_regular",
]
