import numpy as np
import pytest
from scipy import ndimage

from quasilevel.errors import GenericityViolated
from quasilevel.qp_core import TrigSeries
from quasilevel.torus4 import (DirectionPair, bar_field, classify_case, collapsed, construct_separator,
                               essentially_positioned, slice_profile, unimodular_completion, verify_theorem1)

L1 = [1, 0, 0, 0]
L2 = [0, 1, 0.1 * 2 ** 0.5, 0.1 * 3 ** 0.5]
LIFT = TrigSeries.cos_sum(3).lift(1)
# slices shifted by 1.5 cos(2 pi t): energy intervals move past each other
SHIFTED = LIFT + TrigSeries.from_real(4, cos=[((1, 0, 0, 0), 1.5)])
PERTURBED = LIFT + TrigSeries.from_real(4, cos=[((1, 1, 0, 0), 0.025), ((1, -1, 0, 0), 0.025)])


@pytest.fixture(scope="module")
def dp():
    return DirectionPair(L1, L2)


@pytest.fixture(scope="module")
def lift_profile(dp):
    return slice_profile(LIFT, dp, t_samples=8)


@pytest.fixture(scope="module")
def lift_separators(dp, lift_profile):
    return {c: construct_separator(LIFT, dp, c, lift_profile, n_base=16) for c in (-0.5, 0.1, 0.5)}


# ---------------------------------------------------------------- coordinates

@pytest.mark.parametrize("l1", [(1, 0, 0, 0), (0, 0, 1, 0), (2, 3, 0, 0), (3, -5, 7, 2), (0, 4, 0, 9)])
def test_unimodular_completion(l1):
    V = unimodular_completion(np.array(l1))
    assert V.dtype.kind == "i"
    assert abs(round(np.linalg.det(V.astype(float)))) == 1
    assert np.array_equal(np.array(l1) @ V, [1, 0, 0, 0])


def test_direction_pair_genericity():
    with pytest.raises(GenericityViolated):
        DirectionPair(L1, [0, 1, 0.5, 0.25])
    with pytest.raises(ValueError):
        DirectionPair([1.5, 0, 0, 0], L2)


def test_direction_pair_frames(dp):
    assert np.array_equal(dp.U @ dp.V, np.eye(4, dtype=np.int64))
    assert np.allclose(dp.B, [1, 0.1 * 2 ** 0.5, 0.1 * 3 ** 0.5])
    t, y = 0.3, np.array([0.2, 0.7, 0.45])
    x = dp.to_original(np.concatenate([[t], y]))
    assert np.isclose(dp.slice_series(PERTURBED, t)(y), PERTURBED(x))


# ---------------------------------------------------------------- profiles

def test_classify_case():
    assert classify_case([-0.3, -0.3], [0.3, 0.3], ["interval"] * 2, 1e-3)[0] == "Case2"
    assert classify_case([-0.3, 0.5], [-0.1, 0.9], ["interval"] * 2, 1e-3)[0] == "Case1"
    assert classify_case([0.2, 0.2], [0.2, 0.2], ["point"] * 2, 1e-3)[0] == "Degenerate"
    case, min_hi, max_lo = classify_case([-0.3, np.nan], [0.3, np.nan], ["interval", "empty"], 1e-3)
    assert case == "Case1" and min_hi == -np.inf and max_lo == np.inf


def test_lift_profile_constant(lift_profile):
    P = lift_profile
    assert P.case == "Case2"
    assert np.ptp(P.hi) < 1e-9 and np.ptp(P.lo) < 1e-9
    assert np.isclose(P.min_hi, -P.max_lo, atol=1e-3)
    assert P.label is not None and sum(map(abs, P.label)) == 1


def test_perturbed_profile_continuous(dp):
    P = slice_profile(PERTURBED, dp, t_samples=8)
    assert P.case == "Case2"
    assert P.max_jump < 0.2
    assert "jump" not in P.regimes


def test_shifted_profile_case1(dp):
    P = slice_profile(SHIFTED, dp, t_samples=8)
    assert P.case == "Case1"
    assert P.min_hi < P.max_lo
    # each slice is the cos-sum plus a constant, so the interval just moves
    assert np.allclose(P.hi - P.lo, (P.hi - P.lo)[0], atol=2e-3)
    assert np.allclose(0.5 * (P.hi + P.lo), 1.5 * np.cos(2 * np.pi * P.t), atol=2e-3)


def test_profile_json_roundtrip(lift_profile):
    from quasilevel.torus4 import SliceProfile
    Q = SliceProfile.from_json(lift_profile.to_json())
    assert Q.case == lift_profile.case and Q.labels == lift_profile.labels
    assert np.array_equal(Q.hi, lift_profile.hi)


# ---------------------------------------------------------------- collapsed function

def _grid(n=121, R=3.0):
    ax = np.linspace(-R, R, n)
    return np.meshgrid(ax, ax)


def _escape_oracle(F, i, j):
    """Highest c with (i, j) joined to the border inside {F >= c}, by bisection on labels."""
    lo, hi = float(F.min()), float(F[i, j])
    for _ in range(60):
        c = 0.5 * (lo + hi)
        lab, _ = ndimage.label(F >= c)
        border = set(np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))) - {0}
        lo, hi = (c, hi) if lab[i, j] in border else (lo, c)
    return lo


def test_collapsed_bump_flattened():
    X, Y = _grid()
    F = np.exp(-(X ** 2 + Y ** 2)) + 0.01 * X
    Fb = collapsed(F)
    # the tilted bump escapes through a saddle, below the highest border value
    a = _escape_oracle(F, 60, 60)
    assert Fb[60, 60] == pytest.approx(a, abs=1e-9)
    assert a < np.concatenate([F[0], F[-1], F[:, 0], F[:, -1]]).max()
    assert np.all(Fb >= F.min() - 1e-12) and np.all(Fb <= F.max() + 1e-12)
    assert collapsed(-F)[60, 60] == pytest.approx(-a, abs=1e-9)


def test_collapsed_ramp_unchanged():
    X, Y = _grid()
    F = X + 0.3 * Y
    assert np.allclose(collapsed(F), F)


def test_bar_field_properties(dp):
    bf = bar_field(LIFT, dp, (0.3, 1.7), window=4.0, h=1 / 16)
    assert bf.continuous
    m = bf.compact_mask()
    assert np.allclose(bf.fbar[~m], bf.f[~m])
    assert bf.fbar.min() >= bf.f.min() - 1e-12 and bf.fbar.max() <= bf.f.max() + 1e-12
    # a flattened component caps a hill or fills a pit: f lies on one side of its value
    for v in np.unique(np.round(bf.fbar[m], 9)):
        lab, k = ndimage.label(m & (np.abs(bf.fbar - v) < 1e-8))
        for r in range(1, k + 1):
            d = bf.f[lab == r] - v
            assert d.min() >= -1e-8 or d.max() <= 1e-8
    assert bf.markers == sorted(bf.markers)


# ---------------------------------------------------------------- separators

def test_case2_separator_classes(lift_separators):
    for c, S in lift_separators.items():
        assert S.kind == "fbar"
        assert sum(map(abs, S.klass)) >= 1
        assert S.position == ("EssentiallyBelow" if c > S.base_levels[0] else "EssentiallyAbove")


@pytest.mark.parametrize("c", [-0.5, 0.5])
def test_case2_position_confirmed(dp, lift_separators, c):
    S = lift_separators[c]
    assert essentially_positioned(LIFT, S, dp, c, sample_count=3) == S.position


def test_separator_class_rigid(dp, lift_profile, lift_separators):
    dp2 = dp.perturbed([0, 0, 1e-5, -1e-5])
    S2 = construct_separator(LIFT, dp2, 0.1, lift_profile, n_base=16)
    assert S2.klass == lift_separators[0.1].klass


def test_position_monotone_in_level(lift_separators):
    order = {"EssentiallyAbove": 0, "EssentiallyBelow": 1}
    pos = [order[lift_separators[c].position] for c in sorted(lift_separators)]
    assert pos == sorted(pos)


def test_position_monotone_for_fixed_separator(dp, lift_separators):
    S = lift_separators[0.1]
    assert S.position == "EssentiallyBelow"
    for c in (0.3, 0.8, 1.5):
        assert essentially_positioned(LIFT, S, dp, c, sample_count=2) == "EssentiallyBelow"


def test_case1_slice_separator(dp):
    P = slice_profile(SHIFTED, dp, t_samples=8)
    for c in (-0.9, 0.9):
        S = construct_separator(SHIFTED, dp, c, P)
        assert S.kind == "slice" and S.klass == (1, 0, 0, 0)
        assert S.position == ("EssentiallyBelow" if c > 0 else "EssentiallyAbove")
        assert essentially_positioned(SHIFTED, S, dp, c, sample_count=2, window=3.0, h=1 / 16) == S.position


# ---------------------------------------------------------------- open trajectories

def test_verify_above_max_is_empty(dp):
    r = verify_theorem1(LIFT, dp, 3.5, sample_count=2)
    assert r.open_count == 0 and r.compact_count == 0 and r.stable


def test_verify_small(dp, lift_separators):
    r = verify_theorem1(LIFT, dp, 0.1, sample_count=3, separator=lift_separators[0.1], long_R=30.0)
    assert r.open_count > 0
    assert r.max_angle < 1e-2
    assert r.C > 0
