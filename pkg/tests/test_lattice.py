import numpy as np
import pytest

from dynrcm import lattice as L


def test_box_geometry():
    b = L.box(3, 2)
    assert b.shape == (7, 7) and b.size == 49
    assert len(b.sites()) == 49
    assert b.index(b.sites()).tolist() == list(range(49))
    assert b.index([[10, 0]])[0] == -1
    assert L.box(2.7, 3).size == 125


def test_dimension_one_rejected():
    with pytest.raises(ValueError, match="d >= 2"):
        L.box(2, 1)


def test_edge_normalisation():
    e = L.Edge((1, 0), (0, 0))
    assert e.x == (0, 0) and e.axis == 0
    with pytest.raises(ValueError):
        L.Edge((0, 0), (1, 1))


@pytest.mark.parametrize("n,d", [(1, 2), (3, 2), (2, 3)])
def test_edge_set_counts(n, d):
    b = L.cube((0,) * d, n - 1)
    m = n ** d
    inner = d * (n - 1) * n ** (d - 1)
    assert len(L.edge_set(b, both=True).axis) == inner
    assert len(L.edge_set(b).axis) == inner + L.boundary_size(b.sites())
    assert L.boundary_size(b.sites()) == 2 * d * n ** (d - 1)
    assert m == b.size


def test_product_rule_exact():
    g = lambda x: x[0] ** 2 + 3 * x[1]
    h = lambda x: np.sin(x[0]) - x[1]
    for x in [(0, 0), (2, -1), (-3, 5)]:
        for ax in (0, 1):
            assert abs(L.product_rule_residual(g, h, L.Edge.from_base(x, ax))) < 1e-12


def test_isoperimetric_ratio_of_cube():
    sites = L.cube((0, 0), 3).sites()
    assert L.isoperimetric_ratio(sites) == pytest.approx(4 / 16)


def test_field_on_zero_extension():
    b = L.box(1, 2)
    v = np.arange(9.0)
    assert L.field_on(v, b, [[5, 5]])[0] == 0
    assert L.field_on(v, b, [[-1, -1]])[0] == 0.0
    assert L.field_on(v, b, [[1, 1]])[0] == 8.0
