"""Trigonometric series on T^n, affine embeddings and quasiperiodic functions.

Frequencies are exact integer vectors; every irrational quantity enters through
the embedding matrix or through covectors handed to :func:`irrationality_degree`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from . import kernels
from .errors import AmbiguousAtBound, NoUnimodularRoot, NotFound, WindowBoundaryHit

IMAG_TOL = 1e-12
WINDOW_GUARD = 1e-9


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrigSeries:
    """Finite series ``f(x) = sum c_m exp(2 pi i m.x)`` on the n-torus.

    The term list is made Hermitian on construction (``c_m`` and ``c_{-m}``
    replaced by their conjugate-symmetric average), so evaluation is real.
    """

    dimension: int
    freqs: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        n = int(self.dimension)
        if n < 1:
            raise ValueError("dimension must be positive")
        freqs = np.asarray(self.freqs, dtype=np.int64).reshape(-1, n)
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if freqs.shape[0] != coeffs.shape[0]:
            raise ValueError("one coefficient per frequency vector")
        acc = {}
        for m, c in zip(map(tuple, freqs), coeffs):
            acc[m] = acc.get(m, 0j) + c
        sym = {}
        for m, c in acc.items():
            neg = tuple(-v for v in m)
            sym[m] = 0.5 * (c + np.conj(acc.get(neg, 0j)))
            sym[neg] = np.conj(sym[m])
        keys = sorted(k for k, v in sym.items() if v != 0)
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "freqs", _readonly(np.array(keys, dtype=np.int64).reshape(-1, n)))
        object.__setattr__(self, "coeffs", _readonly(np.array([sym[k] for k in keys], dtype=complex)))

    # -- constructors --------------------------------------------------------
    @classmethod
    def from_terms(cls, dimension, terms):
        terms = list(terms)
        if not terms:
            return cls(dimension, np.zeros((0, dimension), dtype=np.int64), np.zeros(0, dtype=complex))
        freqs = [m for m, _ in terms]
        coeffs = [complex(c) if not isinstance(c, (list, tuple)) else complex(c[0], c[1]) for _, c in terms]
        return cls(dimension, freqs, coeffs)

    @classmethod
    def from_real(cls, dimension, cos=(), sin=(), const=0.0):
        """``const + sum a cos(2pi m.x) + sum b sin(2pi m.x)``."""
        terms = []
        if const:
            terms.append(((0,) * dimension, const))
        for m, a in cos:
            m = tuple(int(v) for v in m)
            terms += [(m, a / 2), (tuple(-v for v in m), a / 2)]
        for m, b in sin:
            m = tuple(int(v) for v in m)
            terms += [(m, -0.5j * b), (tuple(-v for v in m), 0.5j * b)]
        return cls.from_terms(dimension, terms)

    @classmethod
    def cos_sum(cls, n=3, amplitudes=None):
        amplitudes = [1.0] * n if amplitudes is None else amplitudes
        return cls.from_real(n, cos=[(tuple(int(i == j) for j in range(n)), a) for i, a in enumerate(amplitudes)])

    @classmethod
    def sin_sum(cls, n=3, amplitudes=None):
        amplitudes = [1.0] * n if amplitudes is None else amplitudes
        return cls.from_real(n, sin=[(tuple(int(i == j) for j in range(n)), a) for i, a in enumerate(amplitudes)])

    # -- algebra -------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = TrigSeries.from_real(self.dimension, const=float(other))
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        return TrigSeries(self.dimension, np.vstack([self.freqs, other.freqs]),
                          np.concatenate([self.coeffs, other.coeffs]))

    def scale(self, s):
        return TrigSeries(self.dimension, self.freqs, self.coeffs * s)

    def lift(self, extra=1):
        """Same function viewed on T^(n+extra), independent of the new leading coordinates."""
        z = np.zeros((self.freqs.shape[0], extra), dtype=np.int64)
        return TrigSeries(self.dimension + extra, np.hstack([z, self.freqs]), self.coeffs)

    @property
    def terms(self):
        return [(tuple(int(v) for v in m), complex(c)) for m, c in zip(self.freqs, self.coeffs)]

    def abs_sum(self):
        return float(np.abs(self.coeffs).sum())

    def lipschitz(self):
        """Bound on |grad f| in superspace coordinates."""
        if not len(self.coeffs):
            return 0.0
        return float(2 * np.pi * (np.abs(self.coeffs) * np.linalg.norm(self.freqs, axis=1)).sum())

    def hessian_bound(self):
        if not len(self.coeffs):
            return 0.0
        return float((2 * np.pi) ** 2 * (np.abs(self.coeffs) * np.linalg.norm(self.freqs, axis=1) ** 2).sum())

    def kernel_arrays(self, A=None, x0=None):
        """(K, ph, cr, ci) for evaluation at y with x = A y + x0."""
        M = self.freqs.astype(float)
        if A is None:
            K = M.copy()
        else:
            K = M @ np.asarray(A, dtype=float)
        ph = np.zeros(len(M)) if x0 is None else np.mod(self.freqs @ np.asarray(x0, dtype=float), 1.0)
        return (np.ascontiguousarray(K), np.ascontiguousarray(ph),
                np.ascontiguousarray(self.coeffs.real), np.ascontiguousarray(self.coeffs.imag))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        K, ph, cr, ci = self._arrays
        return kernels.eval_points(K, ph, cr, ci, np.atleast_2d(x)) if x.ndim > 1 else \
            float(kernels.eval_points(K, ph, cr, ci, x[None])[0])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        K, ph, cr, ci = self._arrays
        g = kernels.grad_points(K, ph, cr, ci, np.atleast_2d(x))
        return g if x.ndim > 1 else g[0]

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        K, ph, cr, ci = self._arrays
        H = kernels.hess_points_np(K, ph, cr, ci, np.atleast_2d(x))
        return H if x.ndim > 1 else H[0]

    @property
    def _arrays(self):
        arr = self.__dict__.get("_arr")
        if arr is None:
            arr = self.kernel_arrays()
            object.__setattr__(self, "_arr", arr)
        return arr

    def to_json(self):
        return {"dimension": self.dimension,
                "terms": [[list(m), [c.real, c.imag]] for m, c in self.terms]}

    @classmethod
    def from_json(cls, d):
        return cls.from_terms(int(d["dimension"]), [(tuple(m), complex(c[0], c[1])) for m, c in d["terms"]])

    def __eq__(self, other):
        return (isinstance(other, TrigSeries) and self.dimension == other.dimension
                and np.array_equal(self.freqs, other.freqs) and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.dimension, self.freqs.tobytes(), self.coeffs.tobytes()))


@dataclass(frozen=True, eq=False)
class AffineEmbedding:
    """x = A y + x0 from the physical R^k into the superspace R^n."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2:
            raise ValueError("embedding matrix must be n x k")
        x0 = np.asarray(self.offset, dtype=float).reshape(A.shape[0])
        if np.linalg.matrix_rank(A) != A.shape[1]:
            raise ValueError("embedding matrix must have full column rank")
        object.__setattr__(self, "matrix", _readonly(A))
        object.__setattr__(self, "offset", _readonly(x0))

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def k(self):
        return self.matrix.shape[1]

    def __call__(self, y):
        return np.asarray(y, dtype=float) @ self.matrix.T + self.offset

    def shifted(self, dx0):
        return AffineEmbedding(self.matrix, self.offset + np.asarray(dx0, dtype=float))


@dataclass(frozen=True, eq=False)
class QuasiperiodicFunction:
    """phi(y) = f(A y + x0) with f a :class:`TrigSeries`."""

    series: TrigSeries
    embedding: AffineEmbedding
    _arrays: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.series.dimension != self.embedding.n:
            raise ValueError("series dimension must equal embedding row count")
        object.__setattr__(self, "_arrays",
                           self.series.kernel_arrays(self.embedding.matrix, self.embedding.offset))

    @property
    def k(self):
        return self.embedding.k

    @property
    def n(self):
        return self.embedding.n

    def frequencies(self):
        """Basic frequencies lambda_s = l^s o iota, one row per superspace axis."""
        return np.array(self.embedding.matrix)

    def values(self, Y):
        K, ph, cr, ci = self._arrays
        return kernels.eval_points(K, ph, cr, ci, np.atleast_2d(np.asarray(Y, dtype=float)))

    def gradients(self, Y):
        K, ph, cr, ci = self._arrays
        return kernels.grad_points(K, ph, cr, ci, np.atleast_2d(np.asarray(Y, dtype=float)))

    def hessians(self, Y):
        K, ph, cr, ci = self._arrays
        return kernels.hess_points_np(K, ph, cr, ci, np.atleast_2d(np.asarray(Y, dtype=float)))

    def descendant(self, x0):
        return QuasiperiodicFunction(self.series, AffineEmbedding(self.embedding.matrix, x0))

    def lipschitz(self):
        return self.series.lipschitz() * np.linalg.norm(self.embedding.matrix, 2)


def evaluate(qp: QuasiperiodicFunction, y) -> float:
    y = np.asarray(y, dtype=float).reshape(1, qp.k)
    K, ph, cr, ci = qp._arrays
    a = 2 * np.pi * (y @ K.T + ph)[0]
    re = float(np.cos(a) @ cr - np.sin(a) @ ci)
    im = float(np.cos(a) @ ci + np.sin(a) @ cr)
    assert abs(im) < IMAG_TOL * max(1.0, qp.series.abs_sum()), f"non-real evaluation: {im}"
    return re


def gradient(qp: QuasiperiodicFunction, y) -> np.ndarray:
    return qp.gradients(np.asarray(y, dtype=float).reshape(1, qp.k))[0]


# ----------------------------------------------------- irrationality degree ----

def _as_mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    if isinstance(v, str):
        return mpmath.mpf(v)
    return mpmath.mpf(v)


def irrationality_degree(ell, Q=10 ** 6, tol=None, dps=50):
    """Rank over Z of the components of ``ell``, certified up to coefficient bound Q.

    Entries may be floats, ints, Fractions, strings or mpmath numbers.  Binary
    floats carry only 53 bits, so a relation found among float entries whose
    residual exceeds the rounding error it could carry is discarded as a
    near-miss.  A relation with coefficients within a factor 10 of ``Q`` raises
    :class:`AmbiguousAtBound`.
    """
    if Q < 2:
        raise ValueError("Q must be at least 2")
    raw = list(np.asarray(ell, dtype=object).ravel())
    float_input = any(isinstance(v, (float, np.floating)) for v in raw)
    with mpmath.workdps(dps):
        xs = [_as_mpf(v) for v in raw]
        scale = max(abs(x) for x in xs)
        if scale == 0:
            raise ValueError("covector must be nonzero")
        n = len(xs)
        if tol is None:
            eps = mpmath.mpf(2) ** -52 if float_input else mpmath.mpf(10) ** (-(dps - 12))
            tol = 4 * n * Q * eps if float_input else eps
        tol = mpmath.mpf(tol)
        comps = [x / scale for x in xs if abs(x / scale) > tol]
        while len(comps) > 1:
            m = len(comps)
            rel = mpmath.pslq(comps, tol=tol, maxcoeff=int(Q), maxsteps=20000)
            if rel is None:
                break
            height = max(abs(r) for r in rel)
            if float_input:
                # a relation that holds for the true reals holds for their double
                # roundings up to sum|r| ulps; anything larger is a Dirichlet near-miss
                resid = abs(mpmath.fsum(r * x for r, x in zip(rel, comps)))
                if resid > 16 * sum(abs(r) for r in rel) * eps:
                    break
            if 10 * height >= Q:
                raise AmbiguousAtBound(f"relation {rel} has coefficients near the bound {Q}")
            drop = max(range(m), key=lambda i: abs(rel[i]))
            comps.pop(drop)
        return len(comps)


# ------------------------------------------------------------ related shift ----

def discrepancy(f: TrigSeries, emb1, emb2, a, window=4.0, n_samples=400, seed=0):
    """Sampled sup |phi2(y + a) - phi1(y)| over the box [-window, window]^k."""
    rng = np.random.default_rng(seed)
    k = emb1.k
    Y = rng.uniform(-window, window, size=(n_samples, k))
    phi1 = QuasiperiodicFunction(f, emb1)
    phi2 = QuasiperiodicFunction(f, emb2)
    return float(np.max(np.abs(phi2.values(Y + np.asarray(a)) - phi1.values(Y))))


def related_shift(f: TrigSeries, emb1: AffineEmbedding, emb2: AffineEmbedding, epsilon, search_radius,
                  window=4.0, n_samples=400, seed=0):
    """Physical shift a with |phi2(y+a) - phi1(y)| < epsilon on the sampled window.

    Searches integer vectors m near the embedded physical box and solves
    ``A a = m - (x0_2 - x0_1)`` in the least-squares sense; the smallest |a|
    passing the sampled check wins.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    A = np.asarray(emb1.matrix)
    if not np.allclose(A, emb2.matrix):
        raise ValueError("embeddings must differ only in x0")
    d = np.asarray(emb2.offset) - np.asarray(emb1.offset)
    step = 0.5 / max(np.abs(A).sum(axis=1).max(), 1e-12)
    ticks = np.arange(-search_radius, search_radius + step, step)
    grid = np.stack(np.meshgrid(*([ticks] * A.shape[1]), indexing="ij"), -1).reshape(-1, A.shape[1])
    ms = np.unique(np.rint(grid @ A.T + d).astype(np.int64), axis=0)
    pinv = np.linalg.pinv(A)
    cand = (ms - d) @ pinv.T
    resid = np.linalg.norm(cand @ A.T + d - ms, axis=1)
    lip = max(f.lipschitz(), 1e-300)
    ok = (np.abs(cand).max(axis=1) <= search_radius) & (resid * lip < epsilon)
    order = np.lexsort((resid[ok], np.linalg.norm(cand[ok], axis=1)))
    for a in cand[ok][order][:50]:
        if discrepancy(f, emb1, emb2, a, window, n_samples, seed) < epsilon:
            return a
    raise NotFound(f"no shift within radius {search_radius} reaches epsilon={epsilon}")


# ---------------------------------------------------------- cut and project ----

@dataclass(frozen=True)
class Window:
    """Open polytope {q : normals @ q < offsets} in the internal space."""

    normals: np.ndarray
    offsets: np.ndarray

    @classmethod
    def interval(cls, lo, hi):
        return cls(np.array([[-1.0], [1.0]]), np.array([-lo, hi], dtype=float))

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = len(lo)
        return cls(np.vstack([-np.eye(d), np.eye(d)]), np.concatenate([-lo, hi]))

    @property
    def dim(self):
        return np.asarray(self.normals).shape[1]

    def chebyshev_radius(self):
        N = np.asarray(self.normals, dtype=float)
        b = np.asarray(self.offsets, dtype=float)
        norms = np.linalg.norm(N, axis=1)
        c = np.zeros(N.shape[1] + 1)
        c[-1] = -1
        res = linprog(c, A_ub=np.hstack([N, norms[:, None]]), b_ub=b,
                      bounds=[(None, None)] * N.shape[1] + [(None, None)], method="highs")
        if res.status != 0:
            return 0.0 if res.status == 2 else np.inf
        return float(res.x[-1])

    def is_empty(self):
        return self.chebyshev_radius() <= 0

    def bounds(self):
        N = np.asarray(self.normals, dtype=float)
        b = np.asarray(self.offsets, dtype=float)
        lo, hi = [], []
        for i in range(N.shape[1]):
            c = np.zeros(N.shape[1])
            c[i] = 1
            r1 = linprog(c, A_ub=N, b_ub=b, bounds=[(None, None)] * N.shape[1], method="highs")
            r2 = linprog(-c, A_ub=N, b_ub=b, bounds=[(None, None)] * N.shape[1], method="highs")
            if r1.status != 0 or r2.status != 0:
                raise ValueError("window must be a bounded polytope")
            lo.append(r1.fun)
            hi.append(-r2.fun)
        return np.array(lo), np.array(hi)

    def slack(self, Q):
        """max over faces of normals.q - offsets (negative inside), per point."""
        N = np.asarray(self.normals, dtype=float)
        b = np.asarray(self.offsets, dtype=float)
        return (np.atleast_2d(Q) @ N.T - b).max(axis=1)


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    rho1: float
    rho2: float

    def __len__(self):
        return len(self.points)


def delone_radii(points, extent, n_probe=4000, seed=0):
    """(covering radius rho1, packing distance rho2) estimated on |y| <= extent/2."""
    points = np.asarray(points)
    if len(points) < 2:
        return float("nan"), float("nan")
    tree = cKDTree(points)
    rho2 = float(tree.query(points, k=2)[0][:, 1].min())
    rng = np.random.default_rng(seed)
    probes = rng.uniform(-extent / 2, extent / 2, size=(n_probe, points.shape[1]))
    rho1 = float(tree.query(probes)[0].max())
    return rho1, rho2


def cut_and_project(lattice_basis, k, window: Window, extent=50.0):
    """Points p(Gamma z) with q(Gamma z) in the window and |p|_inf <= extent.

    Columns of ``lattice_basis`` generate Gamma; the first k superspace
    coordinates are physical (p), the remaining n-k internal (q).
    """
    G = np.asarray(lattice_basis, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n) or abs(np.linalg.det(G)) < 1e-12:
        raise ValueError("lattice basis must be a nonsingular square matrix")
    if window.dim != n - k:
        raise ValueError("window lives in R^(n-k)")
    if window.is_empty():
        return PointSet(np.zeros((0, k)), float("nan"), float("nan"))
    qlo, qhi = window.bounds()
    lo = np.concatenate([np.full(k, -extent), qlo])
    hi = np.concatenate([np.full(k, extent), qhi])
    Ginv = np.linalg.inv(G)
    centre = Ginv @ ((lo + hi) / 2)
    half = np.abs(Ginv) @ ((hi - lo) / 2)
    zlo = np.floor(centre - half).astype(np.int64)
    zhi = np.ceil(centre + half).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(zlo, zhi)]
    pts = []
    for chunk in _product_chunks(axes):
        X = chunk @ G.T
        P, Qn = X[:, :k], X[:, k:]
        keep = np.all(np.abs(P) <= extent, axis=1)
        s = window.slack(Qn[keep])
        if np.any(np.abs(s) <= WINDOW_GUARD):
            raise WindowBoundaryHit("a lattice point projects onto the window boundary")
        pts.append(P[keep][s < -WINDOW_GUARD])
    P = np.vstack(pts) if pts else np.zeros((0, k))
    P = P[np.lexsort(P.T[::-1])] if len(P) else P
    rho1, rho2 = delone_radii(P, extent)
    return PointSet(P, rho1, rho2)


def _product_chunks(axes, chunk=1 << 18):
    lead = axes[0]
    rest = axes[1:]
    if rest:
        tail = np.stack(np.meshgrid(*rest, indexing="ij"), -1).reshape(-1, len(rest))
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
    per = max(1, chunk // len(tail))
    for s in range(0, len(lead), per):
        L = lead[s:s + per]
        yield np.hstack([np.repeat(L, len(tail))[:, None], np.tile(tail, (len(L), 1))]).astype(float)


def fibonacci_lattice_basis():
    """Z^2 rotated so the physical axis has slope equal to the golden ratio."""
    tau = (1 + math.sqrt(5)) / 2
    u = np.array([1.0, tau]) / math.hypot(1.0, tau)
    w = np.array([-u[1], u[0]])
    return np.vstack([u, w])


# ------------------------------------------------- reciprocal polynomials ----

def reciprocal_unimodular_root(coeffs, dps=40):
    """Unimodular root of ``z^n + a1 z^(n-1) + ... + a_(n-1) z + 1``.

    Returns ``(theta, rational)`` where ``rational`` is True when theta is a
    root of unity (psi / 2 pi rational), False when it provably is not, and None
    when the numerics cannot decide.  Among several unimodular roots the one
    with the smallest positive argument is returned.
    """
    import sympy

    a = [int(v) for v in coeffs]
    if a != a[::-1]:
        raise ValueError("coefficients must satisfy a_s = a_(n-s)")
    full = [1] + a + [1]
    n = len(full) - 1
    with mpmath.workdps(dps):
        roots = mpmath.polyroots(full, maxsteps=200, extraprec=2 * dps)
        unit = [r for r in roots if abs(abs(r) - 1) < mpmath.mpf(10) ** -12]
        if not unit:
            raise NoUnimodularRoot(f"no root of {full} on the unit circle")

        def key(r):
            arg = mpmath.arg(r)
            return (arg <= 0, abs(arg))

        theta = sorted(unit, key=key)[0]
        z = sympy.Symbol("z")
        P = sympy.Poly(full, z)
        rational = False
        for m in range(1, 2 * n * n + 3):
            if sympy.totient(m) > n:
                continue
            phi = sympy.Poly(sympy.cyclotomic_poly(m, z), z)
            if P.rem(phi).is_zero:
                val = abs(mpmath.polyval([int(c) for c in phi.all_coeffs()], theta))
                if val < mpmath.mpf(10) ** -(dps // 2):
                    rational = True
                    break
                if val < mpmath.mpf(10) ** -8:
                    rational = None
        return complex(theta), rational


def is_cyclotomic_free(coeffs):
    """True when the palindromic polynomial has no cyclotomic factor."""
    import sympy

    z = sympy.Symbol("z")
    full = [1] + [int(v) for v in coeffs] + [1]
    P = sympy.Poly(full, z)
    n = len(full) - 1
    for m in range(1, 2 * n * n + 3):
        if sympy.totient(m) <= n and P.rem(sympy.Poly(sympy.cyclotomic_poly(m, z), z)).is_zero:
            return False
    return True


__all__ = [
    "TrigSeries", "AffineEmbedding", "QuasiperiodicFunction", "PointSet", "Window",
    "evaluate", "gradient", "irrationality_degree", "related_shift", "discrepancy",
    "cut_and_project", "delone_radii", "fibonacci_lattice_basis", "reciprocal_unimodular_root",
    "canonical_window", "critical_points", "critical_values",
    "is_cyclotomic_free",
]


def canonical_window(lattice_basis, k, shift=None):
    """Internal-space projection of the unit cell, optionally translated.

    Only meaningful for n - k = 1, where the projection is an interval.
    """
    G = np.asarray(lattice_basis, dtype=float)
    if G.shape[0] - k != 1:
        raise ValueError("canonical window implemented for codimension one")
    corners = np.array(list(itertools.product([0, 1], repeat=G.shape[0])), dtype=float)
    q = corners @ G[k:].T
    s = 0.0 if shift is None else float(shift)
    return Window.interval(q.min() + s, q.max() + s)


# ---------------------------------------------------------- critical points ----

def critical_points(f: TrigSeries, resolution=None, tol=1e-9, max_seeds=4096):
    """Critical points of f on T^n by grid seeding and batched Newton polish.

    Degenerate critical sets (e.g. whole critical planes) are handled with a
    pseudo-inverse step and show up as many points with the same value.
    Returns (points in [0,1)^n, values, Morse index per point).
    """
    n = f.dimension
    N = resolution or {1: 256, 2: 96, 3: 32}.get(n, 12)
    ax = np.arange(N) / N
    X = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1).reshape(-1, n)
    G = f.grad(X)
    g2 = (G ** 2).sum(1).reshape((N,) * n)
    is_min = np.ones_like(g2, dtype=bool)
    for shift in itertools.product([-1, 0, 1], repeat=n):
        if any(shift):
            is_min &= g2 <= np.roll(g2, shift, axis=tuple(range(n)))
    Xs = X[is_min.reshape(-1)][:max_seeds].copy()
    if not len(Xs):
        return np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int)
    scale = max(1.0, f.lipschitz())
    step_cap = 1.0 / N
    for _ in range(60):
        g = f.grad(Xs)
        H = f.hess(Xs)
        dx = np.einsum("sij,sj->si", np.linalg.pinv(H, rcond=1e-10), g)
        nrm = np.linalg.norm(dx, axis=1, keepdims=True)
        dx = np.where(nrm > step_cap, dx * step_cap / np.maximum(nrm, 1e-300), dx)
        Xs = Xs - dx
        if np.all(nrm < 1e-15):
            break
    ok = np.linalg.norm(f.grad(Xs), axis=1) < tol * scale
    Xs = np.mod(Xs[ok], 1.0)
    found = []
    for x in Xs:
        if any(np.max(np.abs((x - q + 0.5) % 1.0 - 0.5)) < 1e-6 for q in found[-64:]):
            continue
        found.append(x)
    P = np.array(found).reshape(-1, n)
    vals = f(P) if len(P) else np.zeros(0)
    index = (np.linalg.eigvalsh(f.hess(P)) < 0).sum(1).astype(int) if len(P) else np.zeros(0, dtype=int)
    order = np.argsort(vals, kind="stable")
    return P[order], np.asarray(vals)[order], index[order]


def critical_values(f: TrigSeries, resolution=None):
    """Sorted distinct critical values (rounded at 1e-9)."""
    _, vals, _ = _critical_cached(f, resolution)
    return np.unique(np.round(vals, 9))


_CRIT_CACHE = {}


def _critical_cached(f, resolution=None):
    key = (hash(f), resolution)
    hit = _CRIT_CACHE.get(key)
    if hit is None or hit[0] != f:
        hit = (f, critical_points(f, resolution))
        if len(_CRIT_CACHE) > 64:
            _CRIT_CACHE.clear()
        _CRIT_CACHE[key] = hit
    return hit[1]
