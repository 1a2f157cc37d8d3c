import numpy as np
import pytest

from dynrcm import norms as N
from dynrcm.kernels import KernelPair
from dynrcm.lattice import Box, box, cube, edge_set


def _field(seed, nt=9, m=25):
    g = np.random.default_rng(seed)
    return N.SpaceTimeField(g.normal(size=(nt, m)), 0.0, 0.5)


def test_constant_field_normalized_norm():
    f = N.SpaceTimeField(np.full((11, 16), 3.0), 0.0, 0.1)
    for p, q in [(1, 1), (2, 3), (np.inf, 2)]:
        assert N.st_norm(f, N.NormSpec(p, q, KernelPair(5, 2.5), normalized=True)) == pytest.approx(3.0)


def test_unnormalized_norm_by_hand():
    v = np.array([[1.0, -2.0], [3.0, 0.0], [0.0, 1.0]])
    f = N.SpaceTimeField(v, 0.0, 1.0)
    # spatial l2 per time, trapezoid weights (0.5, 1, 0.5), q = 1
    expect = 0.5 * np.sqrt(5) + 3.0 + 0.5 * 1.0
    assert N.st_norm(f, N.NormSpec(2, 1)) == pytest.approx(expect)


@pytest.mark.parametrize("seed", range(5))
def test_interpolation_and_monotonicity(seed):
    f = _field(seed)
    k = KernelPair(5.0, 2.5)
    assert N.check_interpolation(f, None, None, 1.0, 4.0, 2.0, np.inf, 0.3, zeta=k)["holds"]
    assert N.check_monotonicity(f, zeta=k)["holds"]


def test_interpolation_rejects_bad_exponents():
    with pytest.raises(ValueError, match="exponent relation"):
        N.check_interpolation(_field(0), 2.0, 2.0, 1.0, 4.0, 2.0, 2.0, 0.5)


@pytest.mark.parametrize("d,n", [(2, 3), (2, 6), (3, 3)])
def test_l1_sobolev_cube_indicator_is_extremal(d, n):
    B = cube((0,) * d, n - 1)
    r = N.check_l1_sobolev(np.ones(B.size), B, c_d=1 / (2 * d))
    assert r["ratio"] == pytest.approx(1 / (2 * d))
    assert r["holds"]


def test_box_sobolev_half_box_cut():
    B = box(2, 2)
    v = (B.sites()[:, 0] > 0).astype(float)
    r = N.check_box_sobolev(v, B, c_prime=0.5)
    assert r["holds"] and 0 < r["ratio"] <= 0.5


def test_weighted_sobolev_random_fields():
    g = np.random.default_rng(3)
    B = box(2, 2)
    E = edge_set(B)
    k = KernelPair(5.0, 2.5)
    for _ in range(20):
        f = N.SpaceTimeField(g.normal(size=(9, B.size)), 0.0, 0.25, B)
        w = N.SpaceTimeField(g.uniform(0.1, 1, size=(9, len(E.axis))), 0.0, 0.25, E)
        r = N.check_weighted_sobolev(f, w, 2.5, 10 / 7, zeta=k)
        assert r["holds"] and r["tailored"]["holds"]


def test_sobolev_exponents_round_trip():
    r, s = N.sobolev_exponents(2, 2.5, 10 / 7)
    assert r == pytest.approx(5) and s == pytest.approx(5)
    a, b = N.alpha_beta_from_rs(2, r, s)
    assert a == pytest.approx(2.5) and b == pytest.approx(10 / 7)
    with pytest.raises(ValueError):
        N.sobolev_exponents(3, 5.0, 1.0)


def test_refinement_check_flags_coarse_grid():
    t = np.linspace(0, 4, 5)
    f = N.SpaceTimeField(np.exp(-3 * t)[:, None] * np.ones((1, 4)), 0.0, 1.0)
    with pytest.raises(ValueError, match="too coarse"):
        N.refinement_check(f, N.NormSpec(1, 1), tol=1e-4)
    t = np.linspace(0, 4, 4001)
    f = N.SpaceTimeField(np.exp(-3 * t)[:, None] * np.ones((1, 4)), 0.0, 0.001)
    assert N.refinement_check(f, N.NormSpec(1, 1), tol=1e-4) < 1e-4


def test_nonfinite_values_rejected():
    with pytest.raises(ValueError):
        N.SpaceTimeField(np.array([[1.0, np.nan]]))
