import numpy as np
import pytest

from dynrcm import env as E
from dynrcm.kernels import KernelPair
from dynrcm.lattice import Edge


def _sched():
    return E.ScheduledEnvironment([0.0, 1.0, 3.0], [0.5, 0.2, 1.0])


def test_scheduled_cumulative_and_first_unit_time():
    env = _sched()
    e = Edge.from_base((4, -2), 1)
    assert E.cumulative_rate(env, e, 0.0, 3.0) == pytest.approx(0.9)
    assert E.first_unit_time(env, e, 0.0) == pytest.approx(3.1)
    assert E.first_unit_time(env, e, 1.0) == pytest.approx(2.6)


def test_scheduled_weight_exact():
    env = _sched()
    spec = E.KernelWeightSpec.for_tolerance(5.0, 1e-12)
    k = KernelPair(5.0, 2.5)
    exact = 0.5 * k.k_integral(0, 1) + 0.2 * k.k_integral(1, 3) + k.k_integral(3, spec.horizon)
    assert E.weight(env, Edge.from_base((0, 0), 0), 0.0, spec) == pytest.approx(exact, rel=1e-12)


def test_constant_environment_oracles():
    env = E.make_constant(0.25)
    b, a = E.sample_edges(env, 50, seed=1)
    assert np.all(env.rate(b, a, 3.0) == 0.25)
    assert np.allclose(E.first_unit_times(env, b, a, 2.0), 4.0)
    spec = E.KernelWeightSpec.for_tolerance(5.0, 1e-10)
    w = E.weights(env, b, a, 0.0, spec)
    assert np.allclose(w, 0.25 * (1 - (1 + spec.horizon) ** -4) / 4)


def test_weight_spec_tail():
    spec = E.KernelWeightSpec.for_tolerance(5.0, 1e-8)
    assert spec.tail() <= 1e-8 * (1 + 1e-9)
    with pytest.raises(ValueError):
        E.KernelWeightSpec(5.0, 1.0, 1e-8)


def test_static_layered_rates():
    env = E.make_static_layered((0.5, 1.0))
    base = np.array([[0, 0], [1, 0], [0, 3]])
    assert env.rate(base, np.zeros(3, int), 0.0).tolist() == [0.5, 1.0, 0.5]
    assert env.rate(base, np.ones(3, int), 7.0).tolist() == [0.5, 1.0, 0.5]


def test_dynamical_percolation_marginal_and_refresh():
    env = E.make_dynamical_percolation(0.7, seed=3)
    b, a = E.sample_edges(env, 20000, seed=4)
    r0 = env.rate(b, a, 0.0)
    assert set(np.unique(r0)) <= {0.0, 1.0}
    assert abs(r0.mean() - 0.7) < 4 * np.sqrt(0.21 / 20000)
    # after a long time the states decorrelate: P(same) = p^2 + (1-p)^2
    r1 = env.rate(b, a, 50.0)
    assert abs(np.mean(r0 == r1) - 0.58) < 0.02
    # short times mostly keep the state: P(no refresh in 0.01) ~ 0.99
    assert np.mean(env.rate(b, a, 0.01) == r0) > 0.98


def test_dynamical_percolation_floor():
    env = E.make_dynamical_percolation(0.5, floor=0.2, seed=1)
    b, a = E.sample_edges(env, 1000, seed=2)
    assert set(np.unique(env.rate(b, a, 1.5))) <= {0.2, 1.0}


def test_exclusion_rates_are_products_of_occupations():
    env = E.make_exclusion(8, 0.5, seed=2, window=(0.0, 20.0))
    for t in (0.0, 5.3, 19.0):
        eta = env.occupation(t).reshape(8, 8)
        assert eta.sum() == env.occupation(0.0).sum()
        field = env.rate_field(t)
        for i in range(2):
            assert np.array_equal(field[i], eta * np.roll(eta, -1, axis=i))


def test_langevin_rates_bounded():
    env = E.make_langevin(6, seed=1, window=(0.0, 5.0))
    b, a = E.sample_edges(env, 200, seed=1)
    r = env.rate(b, a, np.linspace(0, 5, 200))
    assert np.all(r > 0) and np.all(r <= 1)
    with pytest.raises(ValueError, match="only generated"):
        env.rate(b, a, 6.0)


def test_weight_lower_bound_holds_on_dynamic_model():
    env = E.make_dynamical_percolation(0.7, seed=5)
    res = E.check_weight_lower_bound(env, 2000, seed=1)
    assert res["holds"] and res["violations"] == 0


def test_weights_independent_of_chunking(monkeypatch):
    env = E.make_dynamical_percolation(0.4, seed=8)
    b, a = E.sample_edges(env, 300, seed=3)
    spec = E.KernelWeightSpec.for_tolerance(5.0, 1e-8)
    w = E.weights(env, b, a, 0.5, spec)
    monkeypatch.setattr(E, "WEIGHT_CHUNK", 7)
    assert np.array_equal(w, E.weights(env, b, a, 0.5, spec))


def test_moment_estimates_constant_exact():
    env = E.make_constant(0.5)
    est = E.moment_estimates(env, 1, 2, 100)
    assert est["a_inv_q"]["mean"] == pytest.approx(2.0)
    assert est["T_theta"]["mean"] == pytest.approx(4.0)


def test_make_environment_errors():
    with pytest.raises(ValueError, match="torus"):
        E.make_environment({"model": "exclusion", "params": {"particle_density": 0.5}})
    with pytest.raises(ValueError, match="unknown"):
        E.make_environment({"model": "nope"})


def test_cell_environment_matches_cell_averages():
    env = E.make_dynamical_percolation(0.6, seed=1, domain=6)
    ce = E.CellEnvironment.from_env(env, 0.0, 0.5, 8)
    cells = E.rate_cells(env, 0.0, 0.5, 8)
    b = np.array([[1, 2]])
    for m in range(8):
        assert ce.rate(b, np.array([0]), 0.5 * m + 0.25)[0] == pytest.approx(cells[m, 0, 1, 2])
    with pytest.raises(ValueError):
        ce.rate(b, np.array([0]), 4.5)
