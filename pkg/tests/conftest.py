import numpy as np
import pytest

from quasilevel.qp_core import AffineEmbedding, QuasiperiodicFunction, TrigSeries


def identity_qp(f):
    n = f.dimension
    return QuasiperiodicFunction(f, AffineEmbedding(np.eye(n), np.zeros(n)))


def random_series(rng, n, terms=3, max_freq=2):
    out = []
    for _ in range(terms):
        m = tuple(int(v) for v in rng.integers(-max_freq, max_freq + 1, size=n))
        if not any(m):
            m = (1,) + m[1:]
        out.append((m, complex(rng.normal(), rng.normal())))
    return TrigSeries.from_terms(n, out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


B_NEAR_E1 = np.array([1.0, 0.1 * 2 ** 0.5, 0.1 * 3 ** 0.5])


def point_polyline_distance(P, Q, k=6):
    """Distance from each point of P to the polyline Q (segments between consecutive vertices)."""
    from scipy.spatial import cKDTree
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    _, idx = cKDTree(Q).query(P, k=min(k, len(Q)))
    idx = np.atleast_2d(idx).reshape(len(P), -1)
    best = np.full(len(P), np.inf)
    for col in range(idx.shape[1]):
        for off in (-1, 0):
            i0 = np.clip(idx[:, col] + off, 0, len(Q) - 2)
            a, b = Q[i0], Q[i0 + 1]
            ab = b - a
            t = np.clip(np.einsum("ij,ij->i", P - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300), 0, 1)
            best = np.minimum(best, np.linalg.norm(P - (a + t[:, None] * ab), axis=1))
    return best


def leaf_vs_trace(f, B, c, x0, length, h=1 / 128):
    """Two-sided distance between the integrated leaf through x0 and the plane-traced level line.

    The trace is cut to the stretch between the vertices nearest to the two leaf
    ends, minus those end vertices, which may overshoot the leaf by up to one
    grid step.
    """
    from quasilevel.plane_trace import PlaneSlice, slice_function, trace_through
    from quasilevel.torus3 import integrate_leaf
    b = np.asarray(B, dtype=float) / np.linalg.norm(B)
    leaf = integrate_leaf(f, b, x0, length, max_step=0.05, spacing=0.005)
    sl = PlaneSlice.from_covectors([b], [float(b @ x0)])
    qp2 = slice_function(f, sl)
    y0 = (np.asarray(x0) - sl.base) @ sl.frame.T
    t = trace_through(qp2, c, y0, R=length + 2.0, h=h)
    pts = sl.embed(t.vertices)
    d1 = point_polyline_distance(leaf, pts)
    ends = [int(np.argmin(np.linalg.norm(pts - leaf[i], axis=1))) for i in (0, -1)]
    if t.closed:
        seg = pts
    else:
        lo, hi = sorted(ends)
        seg = pts[lo + 1:hi]
    d2 = point_polyline_distance(seg, leaf)
    return float(max(d1.max(), d2.max())), leaf, t
