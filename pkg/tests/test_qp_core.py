import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilevel.errors import AmbiguousAtBound, NoUnimodularRoot, NotFound, WindowBoundaryHit
from quasilevel.qp_core import (AffineEmbedding, QuasiperiodicFunction, TrigSeries, Window, canonical_window,
                                critical_points, cut_and_project, discrepancy, evaluate, fibonacci_lattice_basis,
                                gradient, irrationality_degree, is_cyclotomic_free, reciprocal_unimodular_root,
                                related_shift)

from conftest import identity_qp, random_series


def direct_sum(terms, A, x0, y):
    # independent oracle: plain python complex arithmetic, one term at a time
    x = [sum(A[i][j] * y[j] for j in range(len(y))) + x0[i] for i in range(len(A))]
    s = 0j
    for m, c in terms:
        s += c * complex(math.cos(2 * math.pi * sum(mi * xi for mi, xi in zip(m, x))),
                         math.sin(2 * math.pi * sum(mi * xi for mi, xi in zip(m, x))))
    return s


def test_series_is_hermitian():
    f = TrigSeries.from_terms(2, [((1, 0), 1 + 2j)])
    d = dict(f.terms)
    assert d[(1, 0)] == np.conj(d[(-1, 0)])
    assert len(set(d)) == len(f.terms)


def test_evaluate_max_of_cos_sum():
    assert evaluate(identity_qp(TrigSeries.cos_sum(2)), [0.0, 0.0]) == pytest.approx(2.0, abs=1e-14)


def test_evaluate_periodic():
    qp = identity_qp(TrigSeries.cos_sum(2))
    y = np.array([0.37, -1.21])
    assert evaluate(qp, y + [3, -2]) == pytest.approx(evaluate(qp, y), abs=1e-12)


def test_evaluate_matches_direct_summation(rng):
    f = random_series(rng, 3, terms=3)
    A = rng.normal(size=(3, 2))
    x0 = rng.normal(size=3)
    qp = QuasiperiodicFunction(f, AffineEmbedding(A, x0))
    for y in rng.normal(size=(20, 2)) * 3:
        ref = direct_sum(f.terms, A.tolist(), x0.tolist(), y.tolist())
        assert abs(ref.imag) < 1e-12
        assert abs(evaluate(qp, y) - ref.real) < 1e-12


def test_gradient_linear_phase():
    # 2 cos(2 pi (m . A y)) at y with m.A y = 0 has zero gradient; at quarter phase it is -4 pi (A^T m)
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    f = TrigSeries.from_real(2, cos=[((1, 1), 2.0)])
    qp = QuasiperiodicFunction(f, AffineEmbedding(A, np.zeros(2)))
    k = np.array([1, 1]) @ A
    y = k / (k @ k) * 0.25
    assert np.allclose(gradient(qp, y), -4 * np.pi * k, atol=1e-12)


def test_gradient_of_constant_is_zero():
    qp = identity_qp(TrigSeries.from_real(2, const=3.0))
    assert np.all(gradient(qp, [0.3, 0.1]) == 0)


def test_gradient_finite_differences(rng):
    h = 1e-5
    for _ in range(5):
        f = random_series(rng, 3, terms=4)
        qp = QuasiperiodicFunction(f, AffineEmbedding(rng.normal(size=(3, 2)), rng.normal(size=3)))
        for y in rng.normal(size=(20, 2)):
            fd = np.array([(evaluate(qp, y + h * e) - evaluate(qp, y - h * e)) / (2 * h) for e in np.eye(2)])
            g = gradient(qp, y)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_superspace_periodicity(shift):
    f = TrigSeries.cos_sum(3) + TrigSeries.from_real(3, sin=[((1, -2, 1), 0.4)])
    A = np.array([[1.0, 0.2], [0.3, 1.0], [2 ** 0.5, 3 ** 0.5]])
    q1 = QuasiperiodicFunction(f, AffineEmbedding(A, [0.1, 0.2, 0.3]))
    q2 = q1.descendant(np.array([0.1, 0.2, 0.3]) + shift)
    Y = np.random.default_rng(0).normal(size=(10, 2)) * 5
    assert np.max(np.abs(q1.values(Y) - q2.values(Y))) < 1e-12


# ------------------------------------------------------------ irrationality ----

def test_degree_rational_examples():
    assert irrationality_degree([1.0, 0.0, 0.0]) == 1
    assert irrationality_degree([Fraction(1), Fraction(1, 2), Fraction(1, 3)]) == 1
    assert irrationality_degree([1.0, 0.5, 1 / 3]) == 1


def _lll(B, delta=Fraction(3, 4)):
    # textbook LLL over exact rationals; rows of B are the basis
    B = [list(map(Fraction, r)) for r in B]
    n = len(B)

    def dot(u, v):
        return sum(a * b for a, b in zip(u, v))

    def gs():
        Bs, mu = [], [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            v = B[i][:]
            for j in range(i):
                mu[i][j] = dot(B[i], Bs[j]) / dot(Bs[j], Bs[j])
                v = [a - mu[i][j] * b for a, b in zip(v, Bs[j])]
            Bs.append(v)
        return Bs, mu

    Bs, mu = gs()
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                B[k] = [a - q * b for a, b in zip(B[k], B[j])]
                Bs, mu = gs()
        if dot(Bs[k], Bs[k]) >= (delta - mu[k][k - 1] ** 2) * dot(Bs[k - 1], Bs[k - 1]):
            k += 1
        else:
            B[k], B[k - 1] = B[k - 1], B[k]
            Bs, mu = gs()
            k = max(k - 1, 1)
    return B


def test_degree_three_with_lattice_reduction_oracle():
    assert irrationality_degree(["1", mpmath.sqrt(2), mpmath.sqrt(3)], Q=10 ** 6) == 3
    assert irrationality_degree([1.0, 2 ** 0.5, 3 ** 0.5], Q=10 ** 6) == 3
    # oracle: LLL on [I | W x]; a relation of height <= 1e6 would force a first vector of length <= 2 sqrt(3) 1e6
    W = 10 ** 40
    with mpmath.workdps(60):
        x = [mpmath.mpf(1), mpmath.sqrt(2), mpmath.sqrt(3)]
        col = [int(mpmath.nint(W * v)) for v in x]
    basis = [[int(i == j) for j in range(3)] + [col[i]] for i in range(3)]
    red = _lll(basis)
    first = math.sqrt(float(sum(v * v for v in red[0])))
    assert first > 2 * math.sqrt(3) * 1e6


@settings(max_examples=25, deadline=None)
@given(st.permutations([0, 1, 2]), st.sampled_from([Fraction(2), Fraction(-3, 7), Fraction(5, 2)]))
def test_degree_invariant_under_scaling_and_permutation(perm, s):
    with mpmath.workdps(50):
        x = [mpmath.mpf(1), mpmath.sqrt(2), mpmath.sqrt(2) + 3]       # degree 2
        y = [mpmath.mpf(1), mpmath.sqrt(2), mpmath.sqrt(3)]           # degree 3
        sc = mpmath.mpf(s.numerator) / s.denominator
        for v, d in ((x, 2), (y, 3)):
            w = [v[i] * sc for i in perm]
            assert irrationality_degree(w) == d


def test_degree_flags_relation_near_bound():
    with pytest.raises(AmbiguousAtBound):
        irrationality_degree([Fraction(1), Fraction(1, 99991)], Q=10 ** 5)


# ------------------------------------------------------------ related shift ----

def _emb():
    return AffineEmbedding(np.array([[1.0, 0.0], [0.0, 1.0], [2 ** 0.5, 3 ** 0.5 - 1]]), [0.1, 0.2, 0.3])


def test_related_shift_identity():
    f = TrigSeries.cos_sum(3)
    e = _emb()
    a = related_shift(f, e, e, 1e-6, 2.0)
    assert np.allclose(a, 0.0)


def test_related_shift_exact_physical_offset():
    f = TrigSeries.cos_sum(3)
    e1 = _emb()
    b = np.array([0.3, -0.7])
    e2 = e1.shifted(e1.matrix @ b)
    a = related_shift(f, e1, e2, 1e-9, 2.0)
    assert np.allclose(a, -b, atol=1e-9)
    assert discrepancy(f, e1, e2, a) < 1e-9


def test_related_shift_generic_offset():
    f = TrigSeries.cos_sum(3)
    e1 = _emb()
    e2 = e1.shifted([0.0, 0.0, 0.37])
    a = related_shift(f, e1, e2, 1e-2, 40.0)
    # verify on a denser and different sample set than the search used
    assert discrepancy(f, e1, e2, a, n_samples=4000, seed=7) < 1e-2


def test_related_shift_not_found():
    f = TrigSeries.cos_sum(3)
    e1 = _emb()
    with pytest.raises(NotFound):
        related_shift(f, e1, e1.shifted([0.0, 0.0, 0.37]), 1e-6, 1.0)


# ---------------------------------------------------------- cut and project ----

def test_cut_and_project_empty_window():
    ps = cut_and_project(np.eye(2), 1, Window.interval(0.5, 0.5))
    assert len(ps) == 0


def test_fibonacci_chain_two_gap_lengths():
    G = fibonacci_lattice_basis()
    W = canonical_window(G, 1, shift=1e-4)
    ps = cut_and_project(G, 1, W, extent=400.0)
    p = np.sort(ps.points[:, 0])[:1000]
    assert len(p) == 1000
    gaps = np.diff(p)
    distinct = []
    for g in np.sort(gaps):
        if not distinct or g - distinct[-1] > 1e-9:
            distinct.append(g)
    assert len(distinct) == 2
    tau = (1 + 5 ** 0.5) / 2
    assert distinct[1] / distinct[0] == pytest.approx(tau, rel=1e-9)


def test_delone_property():
    G = fibonacci_lattice_basis()
    ps = cut_and_project(G, 1, canonical_window(G, 1, shift=1e-4), extent=100.0)
    d = np.diff(np.sort(ps.points[:, 0]))
    assert d.min() == pytest.approx(ps.rho2, abs=1e-12)
    # covering radius in 1D is half the largest gap (probe estimate from below)
    assert 0.9 * d.max() / 2 <= ps.rho1 <= d.max() / 2 + 1e-12


def test_window_boundary_hit():
    with pytest.raises(WindowBoundaryHit):
        cut_and_project(np.eye(2), 1, Window.interval(0.0, 1.0), extent=5.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(-2, 2), st.integers(-2, 2))
def test_cut_and_project_basis_invariance(a, b):
    G = fibonacci_lattice_basis()
    W = canonical_window(G, 1, shift=1e-4)
    U = np.array([[1, a], [0, 1]]) @ np.array([[1, 0], [b, 1]])      # unimodular
    p1 = cut_and_project(G, 1, W, extent=30.0).points
    p2 = cut_and_project(G @ U, 1, W, extent=30.0).points
    assert p1.shape == p2.shape
    assert np.max(np.abs(p1 - p2)) < 1e-9


# ------------------------------------------------------ reciprocal polynomials ----

def test_fifth_roots_of_unity():
    theta, rational = reciprocal_unimodular_root([1, 1, 1])
    assert abs(theta - np.exp(2j * np.pi / 5)) < 1e-12
    assert rational is True


def test_sixth_root():
    theta, rational = reciprocal_unimodular_root([-1])
    assert abs(theta - np.exp(1j * np.pi / 3)) < 1e-12
    assert rational is True


def test_non_cyclotomic_unimodular_root():
    # oracle: scan small palindromes; numpy roots for the unit-circle test, sympy-free divisibility by
    # testing every root of unity of order <= 30 numerically
    found = None
    for a in range(-3, 4):
        for b in range(-3, 4):
            r = np.roots([1, a, b, a, 1])
            on = np.abs(np.abs(r) - 1) < 1e-9
            if not on.any():
                continue
            cyclo = any(abs(np.polyval([1, a, b, a, 1], np.exp(2j * np.pi * k / m))) < 1e-9
                        for m in range(1, 31) for k in range(m))
            if not cyclo:
                found = (a, b)
                break
        if found:
            break
    assert found is not None
    assert is_cyclotomic_free(list(found) [:1] + [found[1], found[0]])
    theta, rational = reciprocal_unimodular_root([found[0], found[1], found[0]])
    assert abs(abs(theta) - 1) < 1e-12
    assert rational is False


def test_no_unimodular_root():
    with pytest.raises(NoUnimodularRoot):
        reciprocal_unimodular_root([-3])           # z^2 - 3z + 1, real roots off the circle


def test_critical_points_of_cos_sum():
    P, vals, index = critical_points(TrigSeries.cos_sum(2))
    assert len(P) == 4
    assert sorted(np.round(vals, 9)) == [-2.0, 0.0, 0.0, 2.0]
    assert sorted(index) == [0, 1, 1, 2]
