"""Level surfaces in T^3 and the foliation cut out on them by planes B = const.

The surface {f = c} is triangulated by marching tetrahedra on a periodic grid.
Every triangle keeps the integer lift of its three corners, so all homological
bookkeeping (H_2 classes, periods of loops, lattice offsets of leaves) is done
exactly with integer vectors.

Leaves of the foliation are followed on the piecewise-linear surface: the
height B.x is linear on each triangle, so a leaf is a chain of straight
segments.  A leaf that comes back to its starting triangle with zero lattice
offset is closed; one whose offset grows beyond ``R_open`` periods is open.
Triangles crossed by open leaves make up the carriers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np
from scipy.integrate import solve_ivp
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import kernels
from .errors import (CriticalValue, DegenerateSingularity, InconsistentDecomposition, NonConnectedInterval,
                     NonIntegralClass, SaddleToSaddleDifferent)
from .qp_core import TrigSeries, critical_values

CRIT_TOL = 1e-6
CLASS_TOL = 1e-3
DEFAULT_RESOLUTION = 32
R_OPEN = 8.0
MAX_LEAF_STEPS = 400_000


# ------------------------------------------------------------ surfaces ----

@dataclass(eq=False)
class SurfaceComponent:
    index: int
    triangles: np.ndarray
    chi: int
    vector_area: np.ndarray
    rank: int

    @property
    def genus(self):
        return (2 - self.chi) // 2

    @property
    def homology(self):
        return homology_class(self)


@dataclass(eq=False)
class LevelSurface:
    series: TrigSeries
    level: float
    resolution: int
    positions: np.ndarray
    tris: np.ndarray
    shifts: np.ndarray
    nbr: np.ndarray
    nbe: np.ndarray
    off: np.ndarray
    comp_of_tri: np.ndarray
    components: list

    @property
    def corners(self):
        """Lifted corner coordinates (F, 3, 3)."""
        return self.positions[self.tris] + self.shifts

    @property
    def chi(self):
        return sum(c.chi for c in self.components)

    def vertex_count(self):
        return len(self.positions)

    def residual(self):
        return float(np.max(np.abs(self.series(self.positions) - self.level))) if len(self.positions) else 0.0


def _check_level(f, c):
    cv = critical_values(f)
    if len(cv):
        k = int(np.argmin(np.abs(cv - c)))
        if abs(cv[k] - c) < CRIT_TOL:
            raise CriticalValue(c, float(cv[k]))


def extract_level_surface(f: TrigSeries, c, resolution=DEFAULT_RESOLUTION, check=True) -> LevelSurface:
    """Closed oriented triangulation of {f = c} in T^3 (normals along grad f)."""
    if f.dimension != 3:
        raise ValueError("need a series on T^3")
    if check:
        _check_level(f, float(c))
    return _extract_cached(f, float(c), int(resolution))


@lru_cache(maxsize=16)
def _extract_cached(f, c, N):
    ax = np.arange(N) / N
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    V = np.ascontiguousarray((f(X) - c).reshape(N, N, N))
    keys, shifts = kernels.marching_tets_jit(V, kernels.KUHN_TETS, kernels.DLUT)
    uk, inv = np.unique(keys.ravel(), return_inverse=True)
    tris = inv.reshape(-1, 3).astype(np.int64)
    flat, code = np.divmod(uk, 7)
    lo = np.column_stack(np.unravel_index(flat, (N, N, N))).astype(float)
    P0 = lo / N
    P1 = (lo + kernels.DVECS[code]) / N
    K, ph, cr, ci = f.kernel_arrays()
    t = kernels.bisect_segments(K, ph, cr, ci, P0, P1, c, iters=52)
    pos = P0 + t[:, None] * (P1 - P0)
    nbr, nbe, off = _adjacency(tris, shifts, len(pos))
    comp_of_tri, comps = _components(pos, tris, shifts, nbr)
    return LevelSurface(f, c, N, pos, tris, shifts.astype(np.int64), nbr, nbe, off, comp_of_tri, comps)


def _adjacency(tris, shifts, nv):
    F = len(tris)
    if F == 0:
        z = np.zeros((0, 3), dtype=np.int64)
        return z, z, np.zeros((0, 3, 3), dtype=np.int64)
    a = tris.ravel()
    b = tris[:, [1, 2, 0]].ravel()
    key = np.minimum(a, b) * nv + np.maximum(a, b)
    order = np.argsort(key, kind="stable")
    ks = key[order]
    if len(ks) % 2 or np.any(ks[0::2] != ks[1::2]) or (len(ks) > 2 and np.any(ks[2::2] == ks[1:-1:2])):
        raise NonIntegralClass("triangulation is not a closed surface (edge not shared by exactly two triangles)")
    s1, s2 = order[0::2], order[1::2]
    t1, e1 = np.divmod(s1, 3)
    t2, e2 = np.divmod(s2, 3)
    if np.any(tris[t1, e1] != tris[t2, (e2 + 1) % 3]):
        raise NonIntegralClass("inconsistent triangle orientation")
    nbr = np.empty((F, 3), dtype=np.int64)
    nbe = np.empty((F, 3), dtype=np.int64)
    nbr[t1, e1] = t2
    nbr[t2, e2] = t1
    nbe[t1, e1] = e2
    nbe[t2, e2] = e1
    off = np.empty((F, 3, 3), dtype=np.int64)
    # corner e1 of t1 is the same vertex as corner e2+1 of t2
    d = shifts[t1, e1] - shifts[t2, (e2 + 1) % 3]
    d2 = shifts[t1, (e1 + 1) % 3] - shifts[t2, e2]
    if np.any(d != d2):
        raise NonIntegralClass("inconsistent lifts across an edge")
    off[t1, e1] = d
    off[t2, e2] = -d
    return nbr, nbe, off


def _components(pos, tris, shifts, nbr):
    F = len(tris)
    if F == 0:
        return np.zeros(0, dtype=np.int64), []
    rows = np.repeat(np.arange(F), 3)
    A = coo_matrix((np.ones(3 * F), (rows, nbr.ravel())), shape=(F, F)).tocsr()
    ncomp, lab = connected_components(A, directed=False)
    C = pos[tris] + shifts
    va = 0.5 * np.cross(C[:, 1] - C[:, 0], C[:, 2] - C[:, 0])
    comps = []
    for q in range(ncomp):
        tid = np.flatnonzero(lab == q)
        nv = len(np.unique(tris[tid]))
        chi = nv - len(tid) // 2
        rank = _period_rank(tris[tid], shifts[tid])
        comps.append(SurfaceComponent(q, tid, int(chi), va[tid].sum(0), rank))
    return lab.astype(np.int64), comps


def cycle_periods(tris, shifts):
    """Integer periods of a spanning set of cycles of the vertex graph of the given triangles."""
    ids, loc = np.unique(tris, return_inverse=True)
    loc = loc.reshape(tris.shape)
    n = len(ids)
    a = loc.ravel()
    b = loc[:, [1, 2, 0]].ravel()
    da = shifts.reshape(-1, 3)
    db = shifts[:, [1, 2, 0]].reshape(-1, 3)
    delta = db - da  # integer jump from a to b
    G = coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n)).tocsr()
    kappa = np.zeros((n, 3), dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    # tree potential, one BFS per connected piece
    edge_of = {}
    for k in range(len(a)):
        edge_of.setdefault((a[k], b[k]), delta[k])
    for root in range(n):
        if seen[root]:
            continue
        order, pred = breadth_first_order(G, root, directed=False, return_predecessors=True)
        seen[order] = True
        for v in order[1:]:
            u = pred[v]
            d = edge_of.get((u, v))
            if d is None:
                d = -edge_of[(v, u)]
            kappa[v] = kappa[u] + d
    z = kappa[a] + delta - kappa[b]
    z = z[np.any(z != 0, axis=1)]
    return np.unique(z, axis=0) if len(z) else np.zeros((0, 3), dtype=np.int64)


def _period_rank(tris, shifts):
    z = cycle_periods(tris, shifts)
    return int(np.linalg.matrix_rank(z.astype(float))) if len(z) else 0


def homology_class(component) -> np.ndarray:
    """Integer H_2(T^3) class from the summed vector area (int dx2^dx3, dx3^dx1, dx1^dx2)."""
    va = np.asarray(component.vector_area if hasattr(component, "vector_area") else component, dtype=float)
    r = np.round(va)
    if np.max(np.abs(va - r)) >= CLASS_TOL:
        raise NonIntegralClass(f"class {va} is not integral within {CLASS_TOL}")
    return r.astype(np.int64)


# -------------------------------------------------------- singularities ----

@dataclass
class Singularity:
    point: np.ndarray
    kind: str
    height: float
    component: int
    hessian_det: float


@dataclass
class SaddleConnection:
    saddle: int
    polyline: np.ndarray
    offset: float
    height_spread: float


@dataclass
class FoliationSingularities:
    B: np.ndarray
    points: list
    connections: list = field(default_factory=list)
    escaped: int = 0

    def counts(self, component=None):
        pts = [p for p in self.points if component is None or p.component == component]
        return sum(p.kind == "center" for p in pts), sum(p.kind == "saddle" for p in pts)


def _unit(B):
    B = np.asarray(B, dtype=float)
    n = np.linalg.norm(B)
    if n == 0:
        raise ValueError("B must be nonzero")
    return B / n


def _tangent_basis(b):
    ref = np.eye(3)[np.argmin(np.abs(b))]
    e1 = np.cross(b, ref)
    e1 /= np.linalg.norm(e1)
    return np.vstack([e1, np.cross(b, e1)])


def foliation_singularities(M: LevelSurface, B, connections=False, max_length=40.0, return_tol=1e-6):
    """Points of M where grad f is parallel to B, classified by the restricted Hessian."""
    f = M.series
    b = _unit(B)
    if not len(M.tris):
        return FoliationSingularities(b, [])
    g = f.grad(M.positions)
    nrm = g / np.linalg.norm(g, axis=1, keepdims=True)
    Nm = nrm[M.tris]  # (F, 3 corners, 3)
    det = np.linalg.det(Nm)
    good = np.abs(det) > 1e-14
    lam = np.zeros((len(Nm), 3))
    lam[good] = np.linalg.solve(np.transpose(Nm[good], (0, 2, 1)), np.broadcast_to(b, (good.sum(), 3))[..., None])[..., 0]
    inside = good & (np.all(lam >= -1e-9, axis=1) | np.all(lam <= 1e-9, axis=1))
    cand = np.flatnonzero(inside)
    if not len(cand):
        return FoliationSingularities(b, [])
    X = M.corners[cand].mean(axis=1)
    sgn = np.where(lam[cand].sum(1) > 0, 1.0, -1.0)
    L = sgn * np.linalg.norm(f.grad(X), axis=1)
    c = M.level
    for _ in range(40):
        G = f.grad(X)
        H = f.hess(X)
        r = np.concatenate([G - L[:, None] * b, (f(X) - c)[:, None]], axis=1)
        J = np.zeros((len(X), 4, 4))
        J[:, :3, :3] = H
        J[:, :3, 3] = -b
        J[:, 3, :3] = G
        try:
            d = np.linalg.solve(J, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            d = np.einsum("sij,sj->si", np.linalg.pinv(J), r)
        step = np.linalg.norm(d[:, :3], axis=1, keepdims=True)
        cap = 1.0 / M.resolution
        d[:, :3] = np.where(step > cap, d[:, :3] * cap / np.maximum(step, 1e-300), d[:, :3])
        X = X - d[:, :3]
        L = L - d[:, 3]
        if np.all(np.abs(d) < 1e-15):
            break
    G = f.grad(X)
    res = np.linalg.norm(G - L[:, None] * b, axis=1) / np.linalg.norm(G, axis=1)
    ok = (res < 1e-9) & (np.abs(f(X) - c) < 1e-9)
    T = _tangent_basis(b)
    pts = []
    keep = []
    for s in np.flatnonzero(ok):
        x = np.mod(X[s], 1.0)
        if any(np.max(np.abs((x - q.point + 0.5) % 1.0 - 0.5)) < 1e-7 for q in pts):
            continue
        Hr = T @ f.hess(x) @ T.T
        dh = float(np.linalg.det(Hr))
        if abs(dh) < 1e-9:
            raise DegenerateSingularity(f"restricted Hessian determinant {dh:.3e} at {x}")
        pts.append(Singularity(x, "center" if dh > 0 else "saddle", float(b @ x),
                               int(M.comp_of_tri[cand[s]]), dh))
        keep.append(s)
    out = FoliationSingularities(b, pts)
    if connections:
        _saddle_connections(M, out, max_length, return_tol)
    return out


def leaf_field(f, b):
    """Unit tangent field of the leaves: (grad f x b) normalised."""

    def rhs(_s, x):
        v = np.cross(f.grad(x), b)
        return v / np.linalg.norm(v)

    return rhs


def _project(f, c, b, h, x):
    """Move x onto {f = c, b.x = h} with minimal-norm Newton steps."""
    for _ in range(20):
        g = f.grad(x)
        A = np.vstack([g, b])
        r = np.array([f(x) - c, b @ x - h])
        x = x - np.linalg.lstsq(A, r, rcond=None)[0]
        if np.max(np.abs(r)) < 1e-14:
            break
    return x


def _saddle_connections(M, sing, max_length, tol):
    f = M.series
    b = sing.B
    c = M.level
    T = _tangent_basis(b)
    saddles = [(k, p) for k, p in enumerate(sing.points) if p.kind == "saddle"]
    spts = np.array([p.point for _, p in saddles]).reshape(-1, 3)
    rhs = leaf_field(f, b)
    found = set()
    for si, (k, p) in enumerate(saddles):
        Hr = T @ f.hess(p.point) @ T.T
        w, U = np.linalg.eigh(Hr)
        # isotropic directions of the restricted form
        a1, a2 = abs(w[0]), abs(w[1])
        dirs = [U @ np.array([math.sqrt(a2), s * math.sqrt(a1)]) for s in (1.0, -1.0)]
        for d2 in dirs:
            for sg in (1.0, -1.0):
                v = sg * (d2 / np.linalg.norm(d2)) @ T
                x0 = _project(f, c, b, p.height, p.point + 1e-4 * v)
                direction = 1.0 if rhs(0, x0) @ v > 0 else -1.0

                def ev(s_, x, _si=si):
                    dd = x - spts - np.round(x - spts)
                    dd = np.linalg.norm(dd, axis=1)
                    if s_ < 1e-2:
                        dd[_si] = 1.0
                    return float(dd.min()) - tol

                ev.terminal = True
                ev.direction = -1
                sol = solve_ivp(lambda s, x: direction * rhs(s, x), (0, max_length), x0, method="DOP853",
                                rtol=1e-11, atol=1e-12, events=ev, dense_output=False, max_step=0.05)
                if sol.status != 1:
                    sing.escaped += 1
                    continue
                xe = sol.y[:, -1]
                dd = xe - spts - np.round(xe - spts)
                j = int(np.argmin(np.linalg.norm(dd, axis=1)))
                if j != si:
                    raise SaddleToSaddleDifferent(f"separatrix joins saddle {saddles[si][0]} to saddle {saddles[j][0]}")
                lift = np.round(xe - p.point)
                if np.any(lift != 0):
                    sing.escaped += 1
                    continue
                key = (k, round(float(np.linalg.norm(sol.y[:, len(sol.t) // 2] % 1.0)), 6))
                poly = sol.y.T
                if key in found:
                    continue
                found.add(key)
                spread = float(np.max(np.abs(poly @ b - p.height)))
                sing.connections.append(SaddleConnection(k, poly, p.height, spread))
    return sing


def integrate_leaf(f: TrigSeries, B, seed, length, rtol=1e-10, atol=1e-12, max_step=0.02, spacing=None):
    """Integrate the leaf through ``seed`` for arclength ``length`` in each direction.

    Returns the polyline (m, 3) ordered from the backward end to the forward end.
    With ``spacing`` the dense output is sampled at that arclength step instead
    of returning the solver's own steps.
    """
    b = _unit(B)
    rhs = leaf_field(f, b)
    seed = np.asarray(seed, dtype=float)
    halves = []
    for sgn in (-1.0, 1.0):
        sol = solve_ivp(lambda s, x: sgn * rhs(s, x), (0, length), seed, method="DOP853", rtol=rtol,
                        atol=atol, max_step=max_step, dense_output=spacing is not None)
        if spacing is None:
            halves.append(sol.y.T)
        else:
            s = np.append(np.arange(0.0, length, spacing), length)
            halves.append(sol.sol(s).T)
    return np.vstack([halves[0][::-1], halves[1][1:]])


# --------------------------------------------------------- decomposition ----

@dataclass
class Carrier:
    triangles: np.ndarray
    chi_L: int
    disks: int
    genus: int
    raw_class: np.ndarray
    homology: np.ndarray
    loops: list
    loop_periods: list
    period_rank: int
    component: int

    @property
    def chi_N(self):
        return self.chi_L + self.disks


@dataclass
class FoliationDecomposition:
    level: float
    B: np.ndarray
    carriers: list
    cylinders: list
    flags: np.ndarray
    traces: int
    singularities: FoliationSingularities | None = None


def decompose(M: LevelSurface, B, sing: FoliationSingularities | None = None, R_open=R_OPEN,
              max_steps=MAX_LEAF_STEPS) -> FoliationDecomposition:
    """Split M into cylinders of closed leaves and carriers of open leaves; close carriers by disks."""
    b = _unit(B)
    F = len(M.tris)
    if F == 0:
        return FoliationDecomposition(M.level, b, [], [], np.zeros(0, dtype=np.int64), 0, sing)
    flags, ntr = kernels.label_leaves_jit(*_leaf_args(M, b), float(R_open), int(max_steps))
    flags = np.asarray(flags)
    openish = (flags & 6) != 0
    carriers = [_carrier(M, tid) for tid in _regions(M, openish)]
    cylinders = _regions(M, ~openish)
    return FoliationDecomposition(M.level, b, carriers, cylinders, flags, int(ntr), sing)


def _leaf_args(M, b):
    Hc = np.ascontiguousarray(M.positions @ b)
    return Hc, M.positions, M.tris, np.ascontiguousarray(M.shifts), M.nbr, M.nbe, np.ascontiguousarray(M.off), b


def _regions(M, mask):
    F = len(M.tris)
    idx = np.flatnonzero(mask)
    if not len(idx):
        return []
    t = np.repeat(idx, 3)
    nb = M.nbr[idx].ravel()
    keep = mask[nb]
    A = coo_matrix((np.ones(keep.sum()), (t[keep], nb[keep])), shape=(F, F)).tocsr()
    _, lab = connected_components(A, directed=False)
    lab = lab[idx]
    return [idx[lab == q] for q in np.unique(lab)]


def _carrier(M, tid):
    F = len(M.tris)
    inR = np.zeros(F, dtype=bool)
    inR[tid] = True
    nb = M.nbr[tid]
    bnd = ~inR[nb]
    nbnd = int(bnd.sum())
    E = (3 * len(tid) - nbnd) // 2 + nbnd
    fans = _fan_count(M, tid, inR)
    chi_L = fans - E + len(tid)
    C = M.corners
    va = 0.5 * np.cross(C[tid, 1] - C[tid, 0], C[tid, 2] - C[tid, 0]).sum(0)
    loops, periods = _boundary_loops(M, tid, inR)
    disk = np.zeros(3)
    for lp in loops:
        disk += 0.5 * np.cross(lp, np.roll(lp, -1, axis=0)).sum(0)
    raw = va - disk
    chi_N = chi_L + len(loops)
    genus = (2 - chi_N) // 2
    bad = any(np.any(p != 0) for p in periods)
    r = np.round(raw)
    if bad or np.max(np.abs(raw - r)) >= CLASS_TOL:
        hom = None
    else:
        hom = r.astype(np.int64)
    prank = _period_rank(M.tris[tid], M.shifts[tid])
    return Carrier(tid, int(chi_L), len(loops), int(genus), raw, hom, loops, periods, prank,
                   int(M.comp_of_tri[tid[0]]))


def _fan_count(M, tid, inR):
    """Number of vertex fans: corners around a vertex joined through shared region edges."""
    F = len(M.tris)
    cid = -np.ones(3 * F, dtype=np.int64)
    cid[(tid[:, None] * 3 + np.arange(3)).ravel()] = np.arange(3 * len(tid))
    rows, cols = [], []
    for e in range(3):
        t2 = M.nbr[tid, e]
        e2 = M.nbe[tid, e]
        ok = inR[t2]
        a = tid[ok]
        t2 = t2[ok]
        e2 = e2[ok]
        # vertex tris[t,e] is corner (e2+1)%3 of t2; vertex tris[t,e+1] is corner e2 of t2
        rows += [cid[a * 3 + e], cid[a * 3 + (e + 1) % 3]]
        cols += [cid[t2 * 3 + (e2 + 1) % 3], cid[t2 * 3 + e2]]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = 3 * len(tid)
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    nc, _ = connected_components(A, directed=False)
    return int(nc)


def _boundary_loops(M, tid, inR):
    """Boundary cycles with the induced orientation, as lifted polylines, and their lattice periods."""
    C = M.corners
    sides = {(int(t), e) for t in tid for e in range(3) if not inR[M.nbr[t, e]]}
    loops, periods = [], []
    while sides:
        start = min(sides)
        t, e = start
        L = np.zeros(3, dtype=np.int64)
        pts = []
        guard = 0
        while True:
            sides.discard((t, e))
            pts.append(C[t, e] + L)
            # rotate around the head vertex of side (t, e) to the next boundary side
            ct, ce = t, (e + 1) % 3
            while inR[M.nbr[ct, ce]]:
                L = L + M.off[ct, ce]
                ct, ce = int(M.nbr[ct, ce]), (int(M.nbe[ct, ce]) + 1) % 3
                guard += 1
                if guard > 10 * len(M.tris):
                    raise NonIntegralClass("boundary walk did not close")
            t, e = ct, ce
            if (t, e) == start:
                break
        loops.append(np.array(pts))
        periods.append(L.copy())
    return loops, periods


# -------------------------------------------------------------- verdict ----

@dataclass
class Verdict:
    kind: str
    mu: np.ndarray | None = None
    count: int = 0
    eta: np.ndarray | None = None
    genera: list = field(default_factory=list)
    classes: list = field(default_factory=list)
    resolution: int = DEFAULT_RESOLUTION

    def to_json(self):
        return {"kind": self.kind, "mu": None if self.mu is None else [int(v) for v in self.mu],
                "count": self.count, "eta": None if self.eta is None else [float(v) for v in self.eta],
                "genera": [int(g) for g in self.genera],
                "classes": [None if c is None else [int(v) for v in c] for c in self.classes],
                "resolution": self.resolution}


def canonical_sign(v):
    v = np.asarray(v)
    nz = np.flatnonzero(v)
    return v if not len(nz) or v[nz[0]] > 0 else -v


def _classify(dec, B, N):
    if not dec.carriers:
        return Verdict("NoOpenTrajectories", resolution=N)
    genera = [c.genus for c in dec.carriers]
    classes = [c.homology for c in dec.carriers]
    if any(g > 1 for g in genera):
        return Verdict("Chaotic", genera=genera, classes=classes, resolution=N)
    if any(g != 1 for g in genera) or any(c is None for c in classes):
        raise InconsistentDecomposition(f"carrier genera {genera} / classes {classes} at N={N}")
    mu = canonical_sign(classes[0])
    g = reduce(math.gcd, [int(abs(v)) for v in mu])
    if (g != 1 or any(not (np.array_equal(c, mu) or np.array_equal(c, -mu)) for c in classes)
            or len(classes) % 2):
        raise InconsistentDecomposition(f"classes {classes} are not +-mu with mu primitive, even count")
    eta = np.cross(mu, _unit(B))
    eta = eta / np.linalg.norm(eta)
    return Verdict("StableTCI", mu, len(classes), eta, genera, classes, N)


def verdict(f: TrigSeries, B, c, resolution=DEFAULT_RESOLUTION, confirm=True, max_resolution=96) -> Verdict:
    """StableTCI(mu) / Chaotic / NoOpenTrajectories for direction B at level c."""
    N = int(resolution)
    while True:
        M = extract_level_surface(f, c, N)
        try:
            v = _classify(decompose(M, B), B, N)
        except InconsistentDecomposition:
            if 2 * N > max_resolution:
                raise
            N *= 2
            continue
        if v.kind == "Chaotic" and confirm and 2 * N <= max_resolution:
            v2 = _classify(decompose(extract_level_surface(f, c, 2 * N), B), B, 2 * N)
            return v2
        return v


# ------------------------------------------------------ energy interval ----

@dataclass
class EnergyInterval:
    kind: str
    lo: float = float("nan")
    hi: float = float("nan")
    tol: float = 0.0

    def contains(self, c):
        return self.kind != "empty" and self.lo - self.tol <= c <= self.hi + self.tol

    def to_json(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "tol": self.tol}


def _sparse_seeds(M, stride):
    # triangles whose grid cell has every index divisible by stride; the set is
    # invariant under half-period translations when stride divides N/2
    N = M.resolution
    if stride <= 1 or (N // 2) % stride or N % 2:
        return np.arange(len(M.tris), dtype=np.int64)
    cen = (M.positions[M.tris] + M.shifts).mean(axis=1)
    cell = np.floor(np.mod(cen, 1.0) * N + 1e-9).astype(np.int64) % N
    keep = np.all(cell % stride == 0, axis=1)
    return np.flatnonzero(keep).astype(np.int64)


def has_carriers(f, B, c, resolution=DEFAULT_RESOLUTION, stride=2):
    """Predicate behind the energy interval; critical levels are nudged by 3e-6.

    Only leaves through triangles in every ``stride``-th grid cell per axis are
    traced.  Carriers are open surfaces of positive area, so they meet that
    sublattice unless they are thinner than a couple of cells.
    """
    for nudge in (0.0, 3e-6, -3e-6):
        try:
            M = extract_level_surface(f, c + nudge, resolution)
        except CriticalValue:
            continue
        if not len(M.tris):
            return False
        return bool(kernels.any_open_leaf_jit(*_leaf_args(M, _unit(B)), R_OPEN, MAX_LEAF_STEPS,
                                              _sparse_seeds(M, stride)))
    return False


def energy_interval(f: TrigSeries, B, c_range=None, tol=1e-4, resolution=DEFAULT_RESOLUTION, scan=17):
    """U = [c-, c+]: levels carrying open leaves, by scan plus bisection on both ends."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if c_range is None:
        cv = critical_values(f)
        c_range = (float(cv.min()), float(cv.max())) if len(cv) else (-f.abs_sum(), f.abs_sum())
    lo, hi = map(float, c_range)
    grid = np.linspace(lo, hi, scan + 2)
    vals = [has_carriers(f, B, c, resolution) for c in grid[1:-1]]
    idx = np.flatnonzero(vals)
    if not len(idx):
        return EnergyInterval("empty", tol=tol)
    if np.any(np.diff(idx) != 1):
        raise NonConnectedInterval(f"open leaves at disconnected levels {grid[1:-1][idx]}")
    i0, i1 = idx[0] + 1, idx[-1] + 1

    def refine(a, b, want_true_at_b):
        # predicate false at a, true at b
        while abs(b - a) > tol:
            m = 0.5 * (a + b)
            if has_carriers(f, B, m, resolution):
                b = m
            else:
                a = m
        return b

    cm = refine(grid[i0 - 1], grid[i0], True)
    cp = refine(grid[i1 + 1], grid[i1], True)
    kind = "point" if cp - cm < 2 * tol else "interval"
    return EnergyInterval(kind, float(cm), float(cp), tol)


__all__ = [
    "LevelSurface", "SurfaceComponent", "extract_level_surface", "homology_class", "cycle_periods",
    "Singularity", "SaddleConnection", "FoliationSingularities", "foliation_singularities",
    "integrate_leaf", "leaf_field", "Carrier", "FoliationDecomposition", "decompose", "Verdict",
    "verdict", "canonical_sign", "EnergyInterval", "energy_interval", "has_carriers",
    "InconsistentDecomposition",
]
