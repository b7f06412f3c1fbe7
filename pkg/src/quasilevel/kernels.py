"""Hot loops.

Every kernel here is a plain function wrapped by :func:`quasilevel._accel.jit`,
so it runs compiled under numba or as ordinary python when
``QUASILEVEL_PURE_NUMPY=1``. Kernels with a natural array formulation also have
a vectorised numpy twin (suffix ``_np``); the dispatchers at the bottom pick one.

A trigonometric series is passed around as four arrays:
``K`` (T, d) frequencies in the evaluation coordinates, ``ph`` (T,) phase
offsets, ``cr``/``ci`` (T,) real and imaginary coefficient parts, so that
``f(y) = sum cr*cos(2pi(K.y+ph)) - ci*sin(2pi(K.y+ph))``.
"""
import numpy as np

from ._accel import HAS_NUMBA, jit

TWO_PI = 2.0 * np.pi
_CHUNK = 1 << 16


# ---------------------------------------------------------------- series ----

@jit
def _eval_point(K, ph, cr, ci, y):
    s = 0.0
    for t in range(K.shape[0]):
        a = ph[t]
        for r in range(K.shape[1]):
            a += K[t, r] * y[r]
        a *= 2.0 * np.pi
        s += cr[t] * np.cos(a) - ci[t] * np.sin(a)
    return s


@jit
def _grad_point(K, ph, cr, ci, y, out):
    for r in range(K.shape[1]):
        out[r] = 0.0
    for t in range(K.shape[0]):
        a = ph[t]
        for r in range(K.shape[1]):
            a += K[t, r] * y[r]
        a *= 2.0 * np.pi
        w = -2.0 * np.pi * (cr[t] * np.sin(a) + ci[t] * np.cos(a))
        for r in range(K.shape[1]):
            out[r] += w * K[t, r]


@jit
def eval_points_jit(K, ph, cr, ci, Y):
    n = Y.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _eval_point(K, ph, cr, ci, Y[i])
    return out


@jit
def grad_points_jit(K, ph, cr, ci, Y):
    n = Y.shape[0]
    out = np.empty((n, K.shape[1]))
    for i in range(n):
        _grad_point(K, ph, cr, ci, Y[i], out[i])
    return out


def eval_points_np(K, ph, cr, ci, Y):
    out = np.empty(Y.shape[0])
    for s in range(0, Y.shape[0], _CHUNK):
        a = TWO_PI * (Y[s:s + _CHUNK] @ K.T + ph)
        out[s:s + _CHUNK] = np.cos(a) @ cr - np.sin(a) @ ci
    return out


def grad_points_np(K, ph, cr, ci, Y):
    out = np.empty((Y.shape[0], K.shape[1]))
    for s in range(0, Y.shape[0], _CHUNK):
        a = TWO_PI * (Y[s:s + _CHUNK] @ K.T + ph)
        w = -TWO_PI * (np.sin(a) * cr + np.cos(a) * ci)
        out[s:s + _CHUNK] = w @ K
    return out


def hess_points_np(K, ph, cr, ci, Y):
    a = TWO_PI * (Y @ K.T + ph)
    w = -(TWO_PI ** 2) * (np.cos(a) * cr - np.sin(a) * ci)
    return np.einsum("nt,ti,tj->nij", w, K, K)


# ------------------------------------------------------------- bisection ----

@jit
def bisect_segments_jit(K, ph, cr, ci, P0, P1, c, iters):
    """Parameter t in [0,1] of the level crossing on each segment P0->P1."""
    n = P0.shape[0]
    d = P0.shape[1]
    out = np.empty(n)
    y = np.empty(d)
    for i in range(n):
        lo = 0.0
        hi = 1.0
        for r in range(d):
            y[r] = P0[i, r]
        flo = _eval_point(K, ph, cr, ci, y) - c
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            for r in range(d):
                y[r] = P0[i, r] + mid * (P1[i, r] - P0[i, r])
            fm = _eval_point(K, ph, cr, ci, y) - c
            if (fm > 0.0) == (flo > 0.0):
                lo = mid
                flo = fm
            else:
                hi = mid
        out[i] = 0.5 * (lo + hi)
    return out


def bisect_segments_np(K, ph, cr, ci, P0, P1, c, iters):
    lo = np.zeros(P0.shape[0])
    hi = np.ones(P0.shape[0])
    flo = eval_points_np(K, ph, cr, ci, P0) - c
    D = P1 - P0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = eval_points_np(K, ph, cr, ci, P0 + mid[:, None] * D) - c
        same = (fm > 0) == (flo > 0)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


# ------------------------------------------------------- marching squares ----
# Cell corners counter-clockwise v0=(i,j) v1=(i,j+1) v2=(i+1,j+1) v3=(i+1,j)
# (row i is the second plane coordinate).  Local edge k joins v_k and v_{k+1}.
# Segments are emitted oriented with {f > c} on their left.

@jit
def cell_segments(f0, f1, f2, f3, fc, out):
    """Fill ``out`` (2, 2) with local edge pairs; return the segment count."""
    p0 = f0 > 0.0
    p1 = f1 > 0.0
    p2 = f2 > 0.0
    p3 = f3 > 0.0
    npos = int(p0) + int(p1) + int(p2) + int(p3)
    if npos == 0 or npos == 4:
        return 0
    pos = (p0, p1, p2, p3)
    if npos == 2 and p0 == p2:
        # saddle configuration, decided by the cell-centre sign
        if fc > 0.0:
            m = 0
            for k in range(4):
                if not pos[k]:
                    out[m, 0] = (k + 3) % 4
                    out[m, 1] = k
                    m += 1
        else:
            m = 0
            for k in range(4):
                if pos[k]:
                    out[m, 0] = k
                    out[m, 1] = (k + 3) % 4
                    m += 1
        return 2
    # single positive run a..b (counter-clockwise)
    a = 0
    for k in range(4):
        if pos[k] and not pos[(k + 3) % 4]:
            a = k
    b = a
    while pos[(b + 1) % 4]:
        b = (b + 1) % 4
    out[0, 0] = b
    out[0, 1] = (a + 3) % 4
    return 1


@jit
def marching_squares_jit(F, Fc):
    """Oriented segments of {F = 0} on a (ny, nx) grid.

    Returns (S, 2) global edge ids; horizontal edge (i,j)-(i,j+1) has id
    2*(i*nx+j), vertical edge (i,j)-(i+1,j) has id 2*(i*nx+j)+1.  ``Fc`` holds
    cell-centre values (ny-1, nx-1).
    """
    ny, nx = F.shape
    cap = 2 * (ny - 1) * (nx - 1)
    seg = np.empty((cap, 2), dtype=np.int64)
    buf = np.empty((2, 2), dtype=np.int64)
    gid = np.empty(4, dtype=np.int64)
    m = 0
    for i in range(ny - 1):
        for j in range(nx - 1):
            k = cell_segments(F[i, j], F[i, j + 1], F[i + 1, j + 1], F[i + 1, j], Fc[i, j], buf)
            if k == 0:
                continue
            gid[0] = 2 * (i * nx + j)
            gid[1] = 2 * (i * nx + j + 1) + 1
            gid[2] = 2 * ((i + 1) * nx + j)
            gid[3] = 2 * (i * nx + j) + 1
            for s in range(k):
                seg[m, 0] = gid[buf[s, 0]]
                seg[m, 1] = gid[buf[s, 1]]
                m += 1
    return seg[:m]


@jit
def marching_squares_periodic_jit(F, Fc):
    """Same as :func:`marching_squares_jit` on an (N, N) periodic grid."""
    n = F.shape[0]
    cap = 2 * n * n
    seg = np.empty((cap, 2), dtype=np.int64)
    buf = np.empty((2, 2), dtype=np.int64)
    gid = np.empty(4, dtype=np.int64)
    m = 0
    for i in range(n):
        i1 = (i + 1) % n
        for j in range(n):
            j1 = (j + 1) % n
            k = cell_segments(F[i, j], F[i, j1], F[i1, j1], F[i1, j], Fc[i, j], buf)
            if k == 0:
                continue
            gid[0] = 2 * (i * n + j)
            gid[1] = 2 * (i * n + j1) + 1
            gid[2] = 2 * (i1 * n + j)
            gid[3] = 2 * (i * n + j) + 1
            for s in range(k):
                seg[m, 0] = gid[buf[s, 0]]
                seg[m, 1] = gid[buf[s, 1]]
                m += 1
    return seg[:m]


@jit
def chain_segments_jit(nxt, has_prev):
    """Decompose a successor map into chains.

    ``nxt[v]`` is the successor of node v (-1 if none).  Returns a flat order
    array, chain start offsets and a closed flag per chain.
    """
    n = nxt.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    order = np.empty(n + 1, dtype=np.int64)
    starts = np.empty(n + 1, dtype=np.int64)
    closed = np.empty(n + 1, dtype=np.bool_)
    m = 0
    nc = 0
    for pass_ in range(2):
        for v in range(n):
            if seen[v]:
                continue
            if pass_ == 0 and has_prev[v]:
                continue
            starts[nc] = m
            closed[nc] = pass_ == 1
            u = v
            while u >= 0 and not seen[u]:
                seen[u] = True
                order[m] = u
                m += 1
                u = nxt[u]
            nc += 1
    starts[nc] = m
    return order[:m], starts[:nc + 1], closed[:nc]


# -------------------------------------------------------- lazy cell walker ----

@jit
def _edge_point(K, ph, cr, ci, c, h, i, j, k, y, tmp, iters):
    """Refined crossing on local edge k of cell (i, j); written into y."""
    if k == 0:
        ax, ay, bx, by = j * h, i * h, (j + 1) * h, i * h
    elif k == 1:
        ax, ay, bx, by = (j + 1) * h, i * h, (j + 1) * h, (i + 1) * h
    elif k == 2:
        ax, ay, bx, by = j * h, (i + 1) * h, (j + 1) * h, (i + 1) * h
    else:
        ax, ay, bx, by = j * h, i * h, j * h, (i + 1) * h
    tmp[0] = ax
    tmp[1] = ay
    fa = _eval_point(K, ph, cr, ci, tmp) - c
    lo = 0.0
    hi = 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        tmp[0] = ax + mid * (bx - ax)
        tmp[1] = ay + mid * (by - ay)
        fm = _eval_point(K, ph, cr, ci, tmp) - c
        if (fm > 0.0) == (fa > 0.0):
            lo = mid
            fa = fm
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    y[0] = ax + t * (bx - ax)
    y[1] = ay + t * (by - ay)


@jit
def _cell_segs(K, ph, cr, ci, c, h, i, j, tmp, buf):
    tmp[0] = j * h
    tmp[1] = i * h
    f0 = _eval_point(K, ph, cr, ci, tmp) - c
    tmp[0] = (j + 1) * h
    f1 = _eval_point(K, ph, cr, ci, tmp) - c
    tmp[1] = (i + 1) * h
    f2 = _eval_point(K, ph, cr, ci, tmp) - c
    tmp[0] = j * h
    f3 = _eval_point(K, ph, cr, ci, tmp) - c
    fc = 0.0
    if (f0 > 0.0) == (f2 > 0.0) and (f1 > 0.0) == (f3 > 0.0) and (f0 > 0.0) != (f1 > 0.0):
        tmp[0] = (j + 0.5) * h
        tmp[1] = (i + 0.5) * h
        fc = _eval_point(K, ph, cr, ci, tmp) - c
    return cell_segments(f0, f1, f2, f3, fc, buf)


@jit
def walk_level_jit(K, ph, cr, ci, c, h, i0, j0, s0, cx, cy, R, max_steps, iters):
    """Follow one level component through the (implicit, infinite) grid.

    Starts at segment ``s0`` of cell (i0, j0).  Walks forward, then (unless
    closed) backward.  Stops when leaving the box |y - (cx,cy)|_inf <= R.
    Returns (points (m, 2), closed, hit_boundary, exhausted).
    """
    _di = (-1, 0, 1, 0)
    _dj = (0, 1, 0, -1)
    tmp = np.empty(2)
    y = np.empty(2)
    buf = np.empty((2, 2), dtype=np.int64)
    fwd = np.empty((max_steps + 1, 2))
    bwd = np.empty((max_steps + 1, 2))
    k = _cell_segs(K, ph, cr, ci, c, h, i0, j0, tmp, buf)
    ea = buf[s0, 0]
    eb = buf[s0, 1]
    _edge_point(K, ph, cr, ci, c, h, i0, j0, ea, y, tmp, iters)
    fwd[0, 0] = y[0]
    fwd[0, 1] = y[1]
    nf = 1
    closed = False
    hit = False
    exhausted = False
    i = i0
    j = j0
    e_out = eb
    while True:
        _edge_point(K, ph, cr, ci, c, h, i, j, e_out, y, tmp, iters)
        fwd[nf, 0] = y[0]
        fwd[nf, 1] = y[1]
        nf += 1
        if abs(y[0] - cx) > R or abs(y[1] - cy) > R:
            hit = True
            break
        i += _di[e_out]
        j += _dj[e_out]
        e_in = (e_out + 2) % 4
        if i == i0 and j == j0 and e_in == ea:
            closed = True
            break
        if nf >= max_steps:
            exhausted = True
            break
        k = _cell_segs(K, ph, cr, ci, c, h, i, j, tmp, buf)
        found = False
        for s in range(k):
            if buf[s, 0] == e_in:
                e_out = buf[s, 1]
                found = True
        if not found:
            exhausted = True
            break
    nb = 0
    if not closed:
        bhit = False
        i = i0
        j = j0
        e_in = ea
        while True:
            i += _di[e_in]
            j += _dj[e_in]
            e_out2 = (e_in + 2) % 4
            k = _cell_segs(K, ph, cr, ci, c, h, i, j, tmp, buf)
            found = False
            for s in range(k):
                if buf[s, 1] == e_out2:
                    e_in = buf[s, 0]
                    found = True
            if not found:
                exhausted = True
                break
            _edge_point(K, ph, cr, ci, c, h, i, j, e_in, y, tmp, iters)
            bwd[nb, 0] = y[0]
            bwd[nb, 1] = y[1]
            nb += 1
            if abs(y[0] - cx) > R or abs(y[1] - cy) > R:
                bhit = True
                break
            if nb >= max_steps:
                exhausted = True
                break
        hit = hit or bhit
    out = np.empty((nb + nf, 2))
    for q in range(nb):
        out[q, 0] = bwd[nb - 1 - q, 0]
        out[q, 1] = bwd[nb - 1 - q, 1]
    for q in range(nf):
        out[nb + q, 0] = fwd[q, 0]
        out[nb + q, 1] = fwd[q, 1]
    return out, closed, hit, exhausted


# ---------------------------------------------------- marching tetrahedra ----
# Kuhn subdivision: six tetrahedra per cube along monotone lattice paths, so
# every tetrahedron edge runs from a corner to a componentwise-larger corner.

_PERMS = np.array([[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]], dtype=np.int64)


def _kuhn_tets():
    tets = np.zeros((6, 4, 3), dtype=np.int64)
    for t, p in enumerate(_PERMS):
        v = np.zeros(3, dtype=np.int64)
        for s in range(3):
            v = v.copy()
            v[p[s]] = 1
            tets[t, s + 1] = v
    return tets


KUHN_TETS = _kuhn_tets()


def dcode_table():
    """Map offset vectors d in {0,1}^3 minus 0 to codes 0..6 and back."""
    vecs = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=np.int64)
    lut = -np.ones(8, dtype=np.int64)
    for k, v in enumerate(vecs):
        lut[v[0] * 4 + v[1] * 2 + v[2]] = k
    return vecs, lut


DVECS, DLUT = dcode_table()


@jit
def marching_tets_jit(V, tets, dlut):
    """Triangulate {V > 0} boundary on a periodic (N,N,N) grid.

    Returns edge keys (M, 3) with key = flat(lower corner) * 7 + dcode, and
    per-vertex integer lift shifts (M, 3, 3) relative to the canonical vertex.
    Triangles are oriented with normals towards V > 0.
    """
    n = V.shape[0]
    cap = 12 * n * n * n
    keys = np.empty((cap, 3), dtype=np.int64)
    shifts = np.empty((cap, 3, 3), dtype=np.int64)
    m = 0
    cv = np.empty(4)
    cp = np.empty((4, 3), dtype=np.int64)
    ek = np.empty(4, dtype=np.int64)
    es = np.empty((4, 3), dtype=np.int64)
    ep = np.empty((4, 3))
    pos_idx = np.empty(4, dtype=np.int64)
    neg_idx = np.empty(4, dtype=np.int64)
    tri = np.empty((2, 3), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for t in range(6):
                    npos = 0
                    nneg = 0
                    for q in range(4):
                        a = i + tets[t, q, 0]
                        b = j + tets[t, q, 1]
                        cc = k + tets[t, q, 2]
                        cp[q, 0] = a
                        cp[q, 1] = b
                        cp[q, 2] = cc
                        cv[q] = V[a % n, b % n, cc % n]
                        if cv[q] > 0.0:
                            pos_idx[npos] = q
                            npos += 1
                        else:
                            neg_idx[nneg] = q
                            nneg += 1
                    if npos == 0 or npos == 4:
                        continue
                    # crossing edges, each from the lower corner
                    ne = 0
                    for pi in range(npos):
                        for ni in range(nneg):
                            qa = pos_idx[pi]
                            qb = neg_idx[ni]
                            lo = qa
                            hi = qb
                            if qb < qa:
                                lo = qb
                                hi = qa
                            dx = cp[hi, 0] - cp[lo, 0]
                            dy = cp[hi, 1] - cp[lo, 1]
                            dz = cp[hi, 2] - cp[lo, 2]
                            code = dlut[dx * 4 + dy * 2 + dz]
                            la = cp[lo, 0]
                            lb = cp[lo, 1]
                            lc = cp[lo, 2]
                            ek[ne] = ((la % n) * n * n + (lb % n) * n + (lc % n)) * 7 + code
                            es[ne, 0] = la // n
                            es[ne, 1] = lb // n
                            es[ne, 2] = lc // n
                            # midpoints: orientation stays combinatorial even when a
                            # corner value is exactly zero
                            for r in range(3):
                                ep[ne, r] = 0.5 * (cp[qa, r] + cp[qb, r])
                            ne += 1
                    # reference point on the positive side
                    px = 0.0
                    py = 0.0
                    pz = 0.0
                    for pi in range(npos):
                        px += cp[pos_idx[pi], 0]
                        py += cp[pos_idx[pi], 1]
                        pz += cp[pos_idx[pi], 2]
                    px /= npos
                    py /= npos
                    pz /= npos
                    ntri = 1
                    tri[0, 0] = 0
                    tri[0, 1] = 1
                    tri[0, 2] = 2
                    if ne == 4:
                        # crossings ordered (p0n0, p0n1, p1n0, p1n1); quad cycle p0n0 p0n1 p1n1 p1n0.
                        # The diagonal is the one holding the smallest direction code, a choice
                        # invariant under translation and under f - c -> c - f.
                        ntri = 2
                        best = 0
                        for q in range(1, 4):
                            if ek[q] % 7 < ek[best] % 7:
                                best = q
                        if best == 0 or best == 3:
                            tri[0, 0] = 0
                            tri[0, 1] = 1
                            tri[0, 2] = 3
                            tri[1, 0] = 0
                            tri[1, 1] = 3
                            tri[1, 2] = 2
                        else:
                            tri[0, 0] = 1
                            tri[0, 1] = 3
                            tri[0, 2] = 2
                            tri[1, 0] = 2
                            tri[1, 1] = 0
                            tri[1, 2] = 1
                    for s in range(ntri):
                        a0 = tri[s, 0]
                        a1 = tri[s, 1]
                        a2 = tri[s, 2]
                        ux = ep[a1, 0] - ep[a0, 0]
                        uy = ep[a1, 1] - ep[a0, 1]
                        uz = ep[a1, 2] - ep[a0, 2]
                        vx = ep[a2, 0] - ep[a0, 0]
                        vy = ep[a2, 1] - ep[a0, 1]
                        vz = ep[a2, 2] - ep[a0, 2]
                        nx_ = uy * vz - uz * vy
                        ny_ = uz * vx - ux * vz
                        nz_ = ux * vy - uy * vx
                        gx = px - (ep[a0, 0] + ep[a1, 0] + ep[a2, 0]) / 3.0
                        gy = py - (ep[a0, 1] + ep[a1, 1] + ep[a2, 1]) / 3.0
                        gz = pz - (ep[a0, 2] + ep[a1, 2] + ep[a2, 2]) / 3.0
                        if nx_ * gx + ny_ * gy + nz_ * gz < 0.0:
                            tmpi = a1
                            a1 = a2
                            a2 = tmpi
                        keys[m, 0] = ek[a0]
                        keys[m, 1] = ek[a1]
                        keys[m, 2] = ek[a2]
                        for r in range(3):
                            shifts[m, 0, r] = es[a0, r]
                            shifts[m, 1, r] = es[a1, r]
                            shifts[m, 2, r] = es[a2, r]
                        m += 1
    return keys[:m], shifts[:m]


# ------------------------------------------------------ PL leaf labelling ----
# Triangle t has corners tris[t] (vertex ids, canonical positions pos) with
# integer lifts shifts[t];
# edge e joins corners e and e+1.  nbr[t, e] is the triangle across edge e,
# nbe[t, e] its local edge index and off[t, e] the lattice vector with
# lift_nbr + off = lift_t for the shared vertices.  Heights are always formed
# as Hc[v] + B.(shift + L) from the canonical vertex height and the exact
# integer lift, so neighbouring triangles agree bit for bit on every sign.

@jit
def _corner_heights(Hc, tris, shifts, Bv, t, L, h0, out):
    for k in range(3):
        s0 = shifts[t, k, 0] + L[0]
        s1 = shifts[t, k, 1] + L[1]
        s2 = shifts[t, k, 2] + L[2]
        out[k] = Hc[tris[t, k]] + (Bv[0] * s0 + Bv[1] * s1 + Bv[2] * s2) - h0


@jit
def _crossing_edges(hv, out):
    m = 0
    for e in range(3):
        a = hv[e] > 0.0
        b = hv[(e + 1) % 3] > 0.0
        if a != b:
            out[m] = e
            m += 1
    return m


@jit
def trace_leaf_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, t0, h0, e_start, R_open, max_steps, visit):
    """Follow the PL leaf {height = h0} from triangle t0 leaving through e_start.

    Returns (status, steps, offset) with status 1 = closed, 2 = displaced more
    than R_open (sup norm, measured on lifted positions so the test is
    translation invariant), 4 = budget exhausted.  Visited triangles are
    written to ``visit``.
    """
    v0 = tris[t0, 0]
    x0 = pos[v0, 0] + shifts[t0, 0, 0]
    y0 = pos[v0, 1] + shifts[t0, 0, 1]
    z0 = pos[v0, 2] + shifts[t0, 0, 2]
    hv = np.empty(3)
    ce = np.empty(3, dtype=np.int64)
    L = np.zeros(3, dtype=np.int64)
    t = t0
    e_out = e_start
    visit[0] = t0
    steps = 1
    while True:
        tn = nbr[t, e_out]
        en = nbe[t, e_out]
        for r in range(3):
            L[r] += off[t, e_out, r]
        t = tn
        if t == t0 and L[0] == 0 and L[1] == 0 and L[2] == 0:
            return 1, steps, L
        v = tris[t, 0]
        if (abs(pos[v, 0] + (shifts[t, 0, 0] + L[0]) - x0) > R_open
                or abs(pos[v, 1] + (shifts[t, 0, 1] + L[1]) - y0) > R_open
                or abs(pos[v, 2] + (shifts[t, 0, 2] + L[2]) - z0) > R_open):
            return 2, steps, L
        if steps >= max_steps:
            return 4, steps, L
        visit[steps] = t
        steps += 1
        _corner_heights(Hc, tris, shifts, Bv, t, L, h0, hv)
        m = _crossing_edges(hv, ce)
        nxt = -1
        for q in range(m):
            if ce[q] != en:
                nxt = ce[q]
        if nxt < 0:
            return 4, steps, L
        e_out = nxt


@jit
def _seed(Hc, tris, shifts, Bv, t0, hv, ce, L):
    for r in range(3):
        L[r] = 0
    _corner_heights(Hc, tris, shifts, Bv, t0, L, 0.0, hv)
    h0 = (hv[0] + hv[1] + hv[2]) / 3.0
    _corner_heights(Hc, tris, shifts, Bv, t0, L, h0, hv)
    return h0, _crossing_edges(hv, ce)


@jit
def label_leaves_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, R_open, max_steps):
    """Flag every triangle by the kinds of leaves seen through it.

    Bit 1: crossed by a closed leaf.  Bit 2: crossed by a leaf escaping to
    distance R_open.  Bit 4: crossed by a leaf that exhausted the budget.
    Leaves are seeded at the centroid height of each triangle not yet crossed
    by an earlier leaf, in index order.
    """
    M = tris.shape[0]
    flags = np.zeros(M, dtype=np.int64)
    visit = np.empty(max_steps + 1, dtype=np.int64)
    ce = np.empty(3, dtype=np.int64)
    hv = np.empty(3)
    L0 = np.zeros(3, dtype=np.int64)
    ntrace = 0
    for t0 in range(M):
        if flags[t0] != 0:
            continue
        h0, m = _seed(Hc, tris, shifts, Bv, t0, hv, ce, L0)
        if m < 2:
            flags[t0] |= 1
            continue
        status, steps, L = trace_leaf_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, t0, h0, ce[0], R_open,
                                          max_steps, visit)
        ntrace += 1
        if status == 1:
            for q in range(steps):
                flags[visit[q]] |= 1
        else:
            for q in range(steps):
                flags[visit[q]] |= status
            status2, steps2, L2 = trace_leaf_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, t0, h0, ce[1], R_open,
                                                 max_steps, visit)
            bit = status2
            if status2 == 1:
                bit = status
            for q in range(steps2):
                flags[visit[q]] |= bit
    return flags, ntrace


@jit
def any_open_leaf_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, R_open, max_steps, seeds):
    """True as soon as the leaf through the centroid of a seed triangle is not closed."""
    visit = np.empty(max_steps + 1, dtype=np.int64)
    ce = np.empty(3, dtype=np.int64)
    hv = np.empty(3)
    L0 = np.zeros(3, dtype=np.int64)
    for i in range(seeds.shape[0]):
        t0 = seeds[i]
        h0, m = _seed(Hc, tris, shifts, Bv, t0, hv, ce, L0)
        if m < 2:
            continue
        status, steps, L = trace_leaf_jit(Hc, pos, tris, shifts, nbr, nbe, off, Bv, t0, h0, ce[0], R_open,
                                          max_steps, visit)
        if status != 1:
            return True
    return False


# ------------------------------------------------------------ collapsed function ----

@jit
def _find(parent, i):
    r = i
    while parent[r] != r:
        r = parent[r]
    while parent[i] != r:
        nx = parent[i]
        parent[i] = r
        i = nx
    return r


@jit
def escape_levels_jit(F):
    """Highest c such that the cell connects to the grid boundary inside {F >= c}.

    Cells are added in decreasing order of F with union-find (4-neighbours).
    When a component first reaches the boundary, every cell of it gets the
    current level; cells joining later get their own value.
    """
    ny, nx = F.shape
    n = ny * nx
    flat = F.ravel()
    order = np.argsort(-flat, kind="mergesort")
    parent = np.arange(n)
    head = np.arange(n)
    tail = np.arange(n)
    link = -np.ones(n, dtype=np.int64)
    bnd = np.zeros(n, dtype=np.bool_)
    done = np.zeros(n, dtype=np.bool_)
    out = np.empty(n)
    di = np.array([-1, 1, 0, 0])
    dj = np.array([0, 0, -1, 1])
    for q in range(n):
        p = order[q]
        v = flat[p]
        i, j = divmod(p, nx)
        done[p] = True
        if i == 0 or j == 0 or i == ny - 1 or j == nx - 1:
            bnd[p] = True
            out[p] = v
        for k in range(4):
            ii = i + di[k]
            jj = j + dj[k]
            if ii < 0 or jj < 0 or ii >= ny or jj >= nx:
                continue
            nb = ii * nx + jj
            if not done[nb]:
                continue
            ra = _find(parent, p)
            rb = _find(parent, nb)
            if ra == rb:
                continue
            if bnd[ra] != bnd[rb]:
                lost = rb if bnd[ra] else ra
                m = head[lost]
                while m >= 0:
                    out[m] = v
                    m = link[m]
            # append rb's members to ra's list
            link[tail[ra]] = head[rb]
            tail[ra] = tail[rb]
            parent[rb] = ra
            bnd[ra] = bnd[ra] or bnd[rb]
    return out.reshape(ny, nx)


# ------------------------------------------------------------ dispatchers ----

def eval_points(K, ph, cr, ci, Y):
    Y = np.ascontiguousarray(Y, dtype=float)
    if HAS_NUMBA:
        return eval_points_jit(K, ph, cr, ci, Y)
    return eval_points_np(K, ph, cr, ci, Y)


def grad_points(K, ph, cr, ci, Y):
    Y = np.ascontiguousarray(Y, dtype=float)
    if HAS_NUMBA:
        return grad_points_jit(K, ph, cr, ci, Y)
    return grad_points_np(K, ph, cr, ci, Y)


def bisect_segments(K, ph, cr, ci, P0, P1, c, iters=48):
    P0 = np.ascontiguousarray(P0, dtype=float)
    P1 = np.ascontiguousarray(P1, dtype=float)
    if HAS_NUMBA:
        return bisect_segments_jit(K, ph, cr, ci, P0, P1, float(c), iters)
    return bisect_segments_np(K, ph, cr, ci, P0, P1, float(c), iters)
