"""Four quasiperiods: slices T^3_t, profiles c_t-/c_t+, collapsed function, separators.

Coordinates are changed by an integer unimodular matrix so that the rational
covector l1 becomes the first coordinate t = x'_0.  Every plane
{l1 = a, l2 = b} then lies in the slice T^3_t with t = a, where it is a plane
{B.y = const} for the restricted covector B, and the torus3 machinery
applies slice by slice.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import (CaseDegenerate, DomainError, GenericityViolated, NearCriticalLevel, NoNontrivialBaseCircle,
                     TooShort, UnstableComponentClassification, ViolationFound)
from .plane_trace import (PlaneSlice, classify_and_fit, grid_level_classes, slice_function, trace_level,
                          trace_through)
from .qp_core import TrigSeries, irrationality_degree
from .torus3 import canonical_sign, energy_interval, verdict

PROFILE_RESOLUTION = 24
JUMP_TOL = 0.2
BAR_R = 4.0
BAR_H = 1.0 / 32
ANGLE_TOL = 1e-2
STABLE_FRAC = 0.10


def unimodular_completion(v):
    """Integer V with det +-1 and v @ V = (1, 0, ..., 0) for a primitive integer v.

    Column operations of the Euclidean algorithm, i.e. one Hermite normal form
    step on a single row.
    """
    r = np.array([int(x) for x in v], dtype=object)
    n = len(r)
    if reduce(math.gcd, [abs(int(x)) for x in r]) != 1:
        raise ValueError(f"{list(v)} is not primitive")
    V = np.eye(n, dtype=object)
    while sum(1 for x in r if x != 0) > 1:
        nz = [j for j in range(n) if r[j] != 0]
        k = min(nz, key=lambda j: abs(r[j]))
        for j in nz:
            if j != k:
                q = r[j] // r[k]
                r[j] -= q * r[k]
                V[:, j] -= q * V[:, k]
    k = next(j for j in range(n) if r[j] != 0)
    if k != 0:
        V[:, [0, k]] = V[:, [k, 0]]
        r[[0, k]] = r[[k, 0]]
    if r[0] < 0:
        V[:, 0] = -V[:, 0]
    return V.astype(np.int64)


def _inverse_unimodular(V):
    W = np.rint(np.linalg.inv(V.astype(float))).astype(np.int64)
    if not np.array_equal(V @ W, np.eye(len(V), dtype=np.int64)):
        raise ValueError("matrix is not unimodular")
    return W


@dataclass(eq=False)
class DirectionPair:
    """(l1, l2): rational l1 and l2 of irrationality degree 3 on {l1 = 0}.

    After construction ``V`` maps new coordinates to old (x = V x') and
    ``U = V^-1`` maps old to new, with l1 @ V = e0.
    """

    l1: np.ndarray
    l2: np.ndarray
    Q: int = 1000

    def __post_init__(self):
        l1 = np.asarray(self.l1)
        if l1.shape != (4,) or not np.all(np.asarray(l1, dtype=float) == np.rint(np.asarray(l1, dtype=float))):
            raise ValueError("l1 must be an integer 4-vector")
        self.l1 = np.asarray(l1, dtype=np.int64)
        self.l2 = np.asarray(self.l2, dtype=float)
        if self.l2.shape != (4,):
            raise ValueError("l2 must be a 4-vector")
        self.V = unimodular_completion(self.l1)
        self.U = _inverse_unimodular(self.V)
        l2p = self.l2 @ self.V
        self.l2_shift = float(l2p[0])
        self.B = l2p[1:].copy()
        deg = irrationality_degree(self.B, Q=self.Q)
        if deg != 3:
            raise GenericityViolated(f"restricted l2 has irrationality degree {deg}, need 3")

    @property
    def covectors(self):
        return np.vstack([self.l1.astype(float), self.l2])

    def transform(self, f: TrigSeries) -> TrigSeries:
        """f in the adapted coordinates x'."""
        return TrigSeries(4, f.freqs @ self.V, f.coeffs)

    def slice_series(self, f: TrigSeries, t) -> TrigSeries:
        """f_t(y) = f(V (t, y)) as a series on T^3."""
        m = f.freqs @ self.V
        return TrigSeries(3, m[:, 1:], f.coeffs * np.exp(2j * np.pi * m[:, 0] * t))

    def to_original(self, xp):
        return np.asarray(xp, dtype=float) @ self.V.T.astype(float)

    def perturbed(self, dl2):
        return DirectionPair(self.l1, self.l2 + np.asarray(dl2, dtype=float), self.Q)

    def plane(self, a, b):
        return PlaneSlice.from_covectors(self.covectors, (a, b))

    def to_json(self):
        return {"l1": [int(v) for v in self.l1], "l2": [float(v) for v in self.l2], "Q": self.Q}


# ------------------------------------------------------------ slice profile ----

@dataclass
class SliceProfile:
    t: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    kinds: list
    labels: list
    case: str
    min_hi: float
    max_lo: float
    tol: float
    max_jump: float
    regimes: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    @property
    def label(self):
        labs = [l for l in self.labels if l is not None]
        if not labs:
            return None
        vals, counts = np.unique(np.array(labs), axis=0, return_counts=True)
        return tuple(int(v) for v in vals[np.argmax(counts)])

    def zones(self):
        """Maximal runs of consecutive t with one label (cyclic order ignored)."""
        out = []
        for i, l in enumerate(self.labels):
            if out and out[-1][2] == l:
                out[-1][1] = i
            else:
                out.append([i, i, l])
        return [(float(self.t[a]), float(self.t[b]), l) for a, b, l in out]

    def to_json(self):
        return {"t": [float(v) for v in self.t], "lo": [float(v) for v in self.lo], "hi": [float(v) for v in self.hi],
                "kinds": list(self.kinds), "labels": [None if l is None else list(l) for l in self.labels],
                "case": self.case, "min_hi": self.min_hi, "max_lo": self.max_lo, "tol": self.tol,
                "max_jump": self.max_jump, "regimes": list(self.regimes), "errors": dict(self.errors)}

    @classmethod
    def from_json(cls, d):
        nan = float("nan")
        arr = lambda k: np.array([nan if v is None else v for v in d[k]], dtype=float)
        return cls(arr("t"), arr("lo"), arr("hi"), list(d["kinds"]),
                   [None if l is None else tuple(l) for l in d["labels"]], d["case"],
                   nan if d["min_hi"] is None else d["min_hi"], nan if d["max_lo"] is None else d["max_lo"],
                   d["tol"], nan if d["max_jump"] is None else d["max_jump"], list(d["regimes"]),
                   {str(k): v for k, v in d["errors"].items()})


def classify_case(lo, hi, kinds, tol):
    """(case, min_hi, max_lo).  An empty U_t counts as c_t+ = -inf, c_t- = +inf."""
    his = [(-np.inf if k == "empty" else h) for h, k in zip(hi, kinds) if k != "error"]
    los = [(np.inf if k == "empty" else l) for l, k in zip(lo, kinds) if k != "error"]
    if not his:
        return "Degenerate", float("nan"), float("nan")
    min_hi, max_lo = float(min(his)), float(max(los))
    if abs(min_hi - max_lo) < tol:
        return "Degenerate", min_hi, max_lo
    return ("Case2" if min_hi > max_lo else "Case1"), min_hi, max_lo


def _slice_row(f, dp, t, tol, resolution, cache):
    fs = dp.slice_series(f, t)
    key = (fs, float(tol), int(resolution))
    if key in cache:
        return cache[key]
    try:
        U = energy_interval(fs, dp.B, tol=tol, resolution=resolution)
        if U.kind == "empty":
            row = ("empty", float("nan"), float("nan"), None, None)
        else:
            label = None
            if U.kind == "interval":
                v = verdict(fs, dp.B, 0.5 * (U.lo + U.hi), resolution=resolution, confirm=False)
                if v.mu is not None:
                    label = tuple(int(x) for x in canonical_sign(v.mu))
            row = (U.kind, U.lo, U.hi, label, None)
    except DomainError as e:
        row = ("error", float("nan"), float("nan"), None, f"{type(e).__name__}: {e}")
    cache[key] = row
    return row


def slice_profile(f: TrigSeries, dp: DirectionPair, t_samples=16, tol=1e-3, resolution=PROFILE_RESOLUTION,
                  refine=0, threads=1, jump_tol=JUMP_TOL):
    """Energy intervals U_t = [c_t-, c_t+] and labels of the slices f_t, t on a grid.

    ``refine`` rounds insert midpoints between neighbours whose endpoints jump
    by more than ``jump_tol``.
    """
    if f.dimension != 4:
        raise ValueError("slice_profile needs a series on T^4")
    cache = {}
    ts = list(np.arange(t_samples) / t_samples)

    def run(tlist):
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                return list(ex.map(lambda t: _slice_row(f, dp, t, tol, resolution, cache), tlist))
        return [_slice_row(f, dp, t, tol, resolution, cache) for t in tlist]

    rows = dict(zip(ts, run(ts)))
    for _ in range(int(refine)):
        tt = sorted(rows)
        new = []
        for i, t in enumerate(tt):
            t2 = tt[(i + 1) % len(tt)] + (1.0 if i + 1 == len(tt) else 0.0)
            r1, r2 = rows[t], rows[tt[(i + 1) % len(tt)]]
            if max(abs(r1[1] - r2[1]), abs(r1[2] - r2[2])) > jump_tol:
                new.append(0.5 * (t + t2) % 1.0)
        if not new:
            break
        rows.update(zip(new, run(new)))
    tt = np.array(sorted(rows))
    kinds = [rows[t][0] for t in tt]
    lo = np.array([rows[t][1] for t in tt])
    hi = np.array([rows[t][2] for t in tt])
    labels = [rows[t][3] for t in tt]
    errors = {repr(float(t)): rows[t][4] for t in tt if rows[t][4]}
    case, min_hi, max_lo = classify_case(lo, hi, kinds, tol)
    ok = np.isfinite(lo) & np.isfinite(hi)
    jumps = [max(abs(lo[i] - lo[i - 1]), abs(hi[i] - hi[i - 1]))
             for i in range(len(tt)) if ok[i] and ok[i - 1]]
    max_jump = float(max(jumps)) if jumps else float("nan")
    regimes = []
    if any(k == "point" or (k == "interval" and h - l < 2 * tol) for k, l, h in zip(kinds, lo, hi)):
        regimes.append("touching")
    regimes.append(case)
    if max_jump > jump_tol:
        regimes.append("jump")
    return SliceProfile(tt, lo, hi, kinds, labels, case, min_hi, max_lo, tol, max_jump, regimes, errors)


# ------------------------------------------------------------ collapsed function ----

def collapsed(F):
    """f-bar on a sampled window: compact-component regions flattened to their boundary value.

    With a(y) the highest level at which y reaches the window boundary inside
    {f >= c} and b(y) the lowest such level inside {f <= c}, a cell on an
    unbounded level line has a = f = b; inside a compact region exactly one of
    them differs from f and equals the boundary level.  Hence a + b - f.
    """
    F = np.ascontiguousarray(F, dtype=float)
    a = kernels.escape_levels_jit(F)
    b = -kernels.escape_levels_jit(-F)
    return a + b - F


def _plane_grid(f, dp, a, b, R, h, centre=(0.0, 0.0)):
    sl = dp.plane(a, b)
    qp2 = slice_function(f, sl)
    n = int(round(2 * R / h))
    ax = (np.arange(n + 1) - n / 2) * h
    X, Y = np.meshgrid(ax + centre[0], ax + centre[1])
    F = qp2.values(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    return F, ax, qp2


def _inner(n, frac=0.5):
    m = int(round(n * (1 - frac) / 2))
    return slice(m, n - m)


@dataclass
class BarField:
    axis: np.ndarray
    f: np.ndarray
    fbar: np.ndarray
    regions: np.ndarray
    region_values: list
    markers: list
    max_jump: float
    jump_tol: float
    window: float

    @property
    def continuous(self):
        return self.max_jump <= self.jump_tol

    def compact_mask(self, eps=1e-12):
        return np.abs(self.fbar - self.f) > eps


def _boundary_jump(F, Fb, mask):
    jump = 0.0
    for ax in (0, 1):
        a = np.swapaxes(mask, 0, ax)
        x = np.swapaxes(Fb, 0, ax)
        edge = a[1:] != a[:-1]
        if edge.any():
            jump = max(jump, float(np.abs(x[1:] - x[:-1])[edge].max()))
    return jump


def bar_field(f: TrigSeries, dp: DirectionPair, ab, window=BAR_R, h=BAR_H, centre=(0.0, 0.0), check=True,
              stability_tol=0.1):
    """f-bar on the plane {l1 = a, l2 = b}, with the doubling check on the inner half.

    Compact trajectories grow without bound as the level approaches the ends
    of the energy interval, so some compact/unbounded decisions always change
    with the window; only a change that moves f-bar by more than
    ``stability_tol`` counts as unstable.
    """
    a, b = ab
    F, ax, qp2 = _plane_grid(f, dp, a, b, window, h, centre)
    Fb = collapsed(F)
    n = len(ax)
    inner = _inner(n)
    eps = 1e-12
    mask = np.abs(Fb - F) > eps
    if check:
        F2, ax2, _ = _plane_grid(f, dp, a, b, 2 * window, h, centre)
        Fb2 = collapsed(F2)
        off = (len(ax2) - n) // 2
        sub = (slice(off, off + n), slice(off, off + n))
        mask2 = (np.abs(Fb2 - F2) > eps)[sub]
        flip = mask[inner, inner] != mask2[inner, inner]
        moved = np.abs(Fb[inner, inner] - Fb2[sub][inner, inner]) > stability_tol
        if np.any(flip & moved):
            raise UnstableComponentClassification(
                f"compact/unbounded decision changes under window doubling at (a, b) = {tuple(ab)}")
    lab, nreg = ndimage.label(mask)
    keep = np.zeros_like(mask)
    keep[inner, inner] = True
    lab = np.where(np.isin(lab, np.unique(lab[keep & mask])), lab, 0)
    vals = []
    for r in np.unique(lab[lab > 0]):
        vv = Fb[lab == r]
        vals.append((float(np.median(vv)), int(vv.size)))
    markers = sorted({round(v, 9) for v, _ in vals})
    lip = f.lipschitz() * max(1.0, float(np.abs(dp.covectors).max()))
    jump = _boundary_jump(F, Fb, mask)
    return BarField(ax, F, Fb, lab, vals, markers, jump, 2.0 * lip * h, window)


# ------------------------------------------------------------ separators ----

@dataclass
class SeparatorReport:
    kind: str                 # "slice" (T^3_t) or "fbar" (preimage of an f-bar level)
    klass: tuple
    position: str
    t: float = float("nan")
    level: float = float("nan")
    base_levels: tuple = ()
    base_class: tuple = ()
    markers: list = field(default_factory=list)
    samples: int = 0
    C: float = float("nan")
    D: float = float("nan")
    verified: bool | None = None

    def to_json(self):
        return {"kind": self.kind, "class": list(self.klass), "position": self.position, "t": self.t,
                "level": self.level, "base_levels": list(self.base_levels), "base_class": list(self.base_class),
                "markers": [list(m) for m in self.markers], "samples": self.samples, "C": self.C, "D": self.D,
                "verified": self.verified}


def _primitive(v):
    v = np.asarray(v, dtype=np.int64)
    g = reduce(math.gcd, [abs(int(x)) for x in v])
    return g == 1


_BASE_CACHE = {}


def base_function(f, dp, mu, n=32, window=BAR_R, h=BAR_H):
    """f-bar on the base torus: t along columns, s = mu.y along rows.

    The transversal circle in each slice is y(s) = s v with v integral and
    mu.v = 1; f-bar is read at the centre of the plane window through each
    point.
    """
    mu = np.asarray(mu, dtype=np.int64)
    v = unimodular_completion(mu)[:, 0]
    key = (f.freqs.tobytes(), f.coeffs.tobytes(), dp.l1.tobytes(), dp.l2.tobytes(), mu.tobytes(), n,
           float(window), float(h))
    if key in _BASE_CACHE:
        return _BASE_CACHE[key].copy(), v
    G = np.empty((n, n))
    for j in range(n):
        t = j / n
        for i in range(n):
            s = i / n
            xp = np.concatenate([[t], s * v])
            x = dp.to_original(xp)
            sl = dp.plane(t, float(dp.l2 @ x))
            ctr = sl.frame @ (x - sl.base)
            F, ax, _ = _plane_grid(f, dp, t, float(dp.l2 @ x), window, h, ctr)
            k = len(ax) // 2
            G[i, j] = collapsed(F)[k, k]
    if len(_BASE_CACHE) > 16:
        _BASE_CACHE.clear()
    _BASE_CACHE[key] = G.copy()
    return G, v


def pseudotorus_markers(G):
    """(t, s, value) of strict extrema of f-bar along each circle t = const."""
    n = G.shape[0]
    out = []
    for j in range(n):
        col = G[:, j]
        up, dn = np.roll(col, -1), np.roll(col, 1)
        for i in np.flatnonzero(((col > up) & (col > dn)) | ((col < up) & (col < dn))):
            out.append((j / n, i / n, float(col[i])))
    return out


def winding_levels(G, n_levels=64):
    """Levels of the sampled base function whose level set holds a non-contractible circle."""
    lo, hi = float(G.min()), float(G.max())
    if hi - lo < 1e-12:
        return []
    out = []
    for c in np.linspace(lo, hi, n_levels + 2)[1:-1]:
        cls = [k for k in grid_level_classes(G, c) if k != (0, 0)]
        if cls:
            out.append((float(c), cls[0]))
    return out


def construct_separator(f, dp, c, profile: SliceProfile, mu=None, n_base=32, window=BAR_R, h=BAR_H):
    """A non-null-homologous 3-torus essentially below or above M_c."""
    if profile.case == "Degenerate":
        raise CaseDegenerate(f"min c_t+ = {profile.min_hi} and max c_t- = {profile.max_lo} agree within tol")
    if profile.case == "Case1":
        hi = np.where(np.array(profile.kinds) == "empty", -np.inf, profile.hi)
        lo = np.where(np.array(profile.kinds) == "empty", np.inf, profile.lo)
        above = c - hi                    # > 0: slice below M_c
        below = lo - c                    # > 0: slice above M_c
        i_b, i_a = int(np.nanargmax(above)), int(np.nanargmax(below))
        if above[i_b] <= 0 and below[i_a] <= 0:
            raise CaseDegenerate(f"no slice separates level {c}")
        if above[i_b] >= below[i_a]:
            t, pos = float(profile.t[i_b]), "EssentiallyBelow"
        else:
            t, pos = float(profile.t[i_a]), "EssentiallyAbove"
        k = tuple(int(x) for x in canonical_sign(dp.l1))
        return SeparatorReport("slice", k, pos, t=t)
    mu = profile.label if mu is None else tuple(mu)
    if mu is None:
        raise NoNontrivialBaseCircle("Case 2 profile without an integer label")
    G, v = base_function(f, dp, mu, n_base, window, h)
    levels = winding_levels(G)
    if not levels:
        raise NoNontrivialBaseCircle("no level of f-bar on the base torus winds")
    # any two winding levels work; stay away from the ends of the winding range,
    # where f-bar depends on the window through very large compact regions
    lv = np.array([l for l, _ in levels])
    c1, c2 = np.quantile(lv, 0.25), np.quantile(lv, 0.75)
    k1 = levels[int(np.argmin(np.abs(lv - c1)))][1]
    k2 = levels[int(np.argmin(np.abs(lv - c2)))][1]
    c1, c2 = float(lv[np.argmin(np.abs(lv - c1))]), float(lv[np.argmin(np.abs(lv - c2))])
    if c > c1:
        level, (p, q), pos = c1, k1, "EssentiallyBelow"
    else:
        level, (p, q), pos = c2, k2, "EssentiallyAbove"
    kp = np.concatenate([[p], q * np.asarray(mu, dtype=np.int64)])
    klass = canonical_sign(kp @ dp.U)
    if not np.any(klass) or not _primitive(klass):
        raise NoNontrivialBaseCircle(f"separator class {klass.tolist()} is not primitive")
    return SeparatorReport("fbar", tuple(int(x) for x in klass), pos, level=float(level),
                           base_levels=(c1, c2), base_class=(int(p), int(q)),
                           markers=pseudotorus_markers(G))


def _unbounded(mask, min_span):
    lab, n = ndimage.label(mask)
    if not n:
        return np.zeros_like(mask)
    sl = ndimage.find_objects(lab)
    keep = np.zeros(n + 1, dtype=bool)
    for r, s in enumerate(sl, 1):
        if max(s[0].stop - s[0].start, s[1].stop - s[1].start) >= min_span:
            keep[r] = True
    return keep[lab]


def _section_flags(f, dp, N: SeparatorReport, c, a, b, R, h):
    """(below_ok, above_ok) for one plane and window size."""
    F, ax, _ = _plane_grid(f, dp, a, b, R, h)
    n = len(ax)
    span = n // 2
    inner = (_inner(n), _inner(n))
    up = _unbounded(F >= c, span)[inner]
    dn = _unbounded(F <= c, span)[inner]
    if N.kind == "slice":
        hit = np.ones_like(up)
    else:
        Fb = collapsed(F)
        d = Fb - N.level
        hit = np.abs(d) < 1e-9
        for axis in (0, 1):
            s0 = [slice(None)] * 2
            s1 = [slice(None)] * 2
            s0[axis] = slice(0, -1)
            s1[axis] = slice(1, None)
            cross = np.sign(d[tuple(s0)]) != np.sign(d[tuple(s1)])
            near0 = np.abs(d[tuple(s0)]) <= np.abs(d[tuple(s1)])
            hit[tuple(s0)] |= cross & near0
            hit[tuple(s1)] |= cross & ~near0
        hit = hit[inner]
    return not np.any(hit & up), not np.any(hit & dn)


def essentially_positioned(f, N: SeparatorReport, dp, c, sample_count=8, window=BAR_R, h=BAR_H, seed=0):
    """EssentiallyBelow / EssentiallyAbove / Neither, unanimous over sampled planes.

    Each decision is repeated at twice the window and must agree.
    """
    rng = np.random.default_rng(seed)
    below = above = True
    for _ in range(int(sample_count)):
        a = N.t if N.kind == "slice" else float(rng.random())
        b = float(rng.random() * 10.0)
        r1 = _section_flags(f, dp, N, c, a, b, window, h)
        r2 = _section_flags(f, dp, N, c, a, b, 2 * window, h)
        if r1 != r2:
            raise UnstableComponentClassification(f"window doubling changes the decision at (a, b) = ({a}, {b})")
        below &= r1[0]
        above &= r1[1]
    if below and not above:
        return "EssentiallyBelow"
    if above and not below:
        return "EssentiallyAbove"
    if below and above:
        return "EssentiallyBelow" if N.kind == "fbar" and N.level < c else "EssentiallyAbove" \
            if N.kind == "fbar" else "EssentiallyBelow"
    return "Neither"


# ------------------------------------------------------------ Theorem 1 check ----

@dataclass
class Theorem1Report:
    samples: int
    open_count: int
    compact_count: int
    direction: np.ndarray | None
    max_angle: float
    C: float
    D: float
    C_doubled: float
    D_doubled: float
    stable: bool
    skipped: list = field(default_factory=list)

    def to_json(self):
        return {"samples": self.samples, "open_count": self.open_count, "compact_count": self.compact_count,
                "direction": None if self.direction is None else [float(v) for v in self.direction],
                "max_angle": self.max_angle, "C": self.C, "D": self.D, "C_doubled": self.C_doubled,
                "D_doubled": self.D_doubled, "stable": self.stable, "skipped": self.skipped}


def _expected_direction(dp, sl, separator):
    if separator is None:
        return None
    k = np.asarray(separator.klass, dtype=float)
    w = sl.frame @ k
    if np.linalg.norm(w) < 1e-9:
        return None
    d = np.array([-w[1], w[0]])
    return d / np.linalg.norm(d)


def _angle(d, e):
    return float(np.arccos(min(1.0, abs(float(np.dot(d, e))))))


def _sample_plane(f, dp, c, a, b, R, h, long_R, separator):
    sl = dp.plane(a, b)
    qp2 = slice_function(f, sl)
    trajs = trace_level(qp2, c, R, h)
    eta = _expected_direction(dp, sl, separator)
    opens, compacts = [], []
    for tr in trajs:
        if tr.closed:
            if np.max(np.abs(tr.vertices)) < R - 2 * h:
                compacts.append(tr.diameter())
            continue
        if tr.length() < R:
            continue                      # clipped piece of a compact curve or a corner cut
        seed = tr.vertices[len(tr.vertices) // 2]
        long = trace_through(qp2, c, seed, R=long_R, h=h / 2, centre=seed)
        if long.closed:
            compacts.append(long.diameter())
            continue
        fit = classify_and_fit(long)
        opens.append((a, b, fit, long))
    return opens, compacts, eta


def verify_theorem1(f, dp, c, sample_count=30, window=8.0, h=1.0 / 32, long_R=60.0, separator=None, seed=0,
                    threads=1, angle_tol=ANGLE_TOL, stable_frac=STABLE_FRAC):
    """Every open trajectory strong with one direction; C and D stable as samples double."""
    rng = np.random.default_rng(seed)
    ab = [(float(x), float(y) * 10.0) for x, y in rng.random((2 * int(sample_count), 2))]

    def one(p):
        try:
            return _sample_plane(f, dp, c, p[0], p[1], window, h, long_R, separator)
        except (NearCriticalLevel, TooShort) as e:
            return e

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(one, ab))
    else:
        res = [one(p) for p in ab]
    ref = None
    max_angle = 0.0
    Cs, Ds = [], []
    n_open = n_comp = 0
    skipped = []
    for (a, b), r in zip(ab, res):
        if isinstance(r, Exception):
            skipped.append([a, b, f"{type(r).__name__}: {r}"])
            Cs.append(0.0)
            Ds.append(0.0)
            continue
        opens, compacts, eta = r
        n_comp += len(compacts)
        Ds.append(max(compacts + [0.0]))
        cmax = 0.0
        for a_, b_, fit, tr in opens:
            n_open += 1
            if fit.kind != "OpenStrong":
                raise ViolationFound(f"{fit.kind} trajectory at (a, b) = ({a_}, {b_})", (a_, b_), tr)
            if ref is None:
                ref = eta if eta is not None else fit.direction
            target = eta if eta is not None else ref
            ang = _angle(fit.direction, target)
            max_angle = max(max_angle, ang)
            if ang > angle_tol:
                raise ViolationFound(f"direction off by {ang:.3g} rad at (a, b) = ({a_}, {b_})", (a_, b_), tr)
            cmax = max(cmax, fit.deviation_sup)
        Cs.append(cmax)
    half = int(sample_count)
    C1, C2 = max(Cs[:half] + [0.0]), max(Cs + [0.0])
    D1, D2 = max(Ds[:half] + [0.0]), max(Ds + [0.0])
    stable = C2 <= C1 * (1 + stable_frac) + 1e-9 and D2 <= D1 * (1 + stable_frac) + 1e-9
    if not stable:
        raise ViolationFound(f"bounds not stable under sample doubling: C {C1:.4g}->{C2:.4g}, D {D1:.4g}->{D2:.4g}")
    return Theorem1Report(half, n_open, n_comp, ref, max_angle, C1, D1, C2, D2, bool(stable), skipped)


__all__ = ["unimodular_completion", "DirectionPair", "SliceProfile", "slice_profile", "classify_case", "collapsed",
           "BarField", "bar_field", "SeparatorReport", "base_function", "pseudotorus_markers", "winding_levels",
           "construct_separator", "essentially_positioned", "Theorem1Report", "verify_theorem1"]
