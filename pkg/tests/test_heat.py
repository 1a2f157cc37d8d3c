import numpy as np
import pytest
from scipy import integrate

from dynrcm import calibrate, heat
from dynrcm import env as E
from dynrcm.kernels import KernelPair


def test_heat_kernel_against_bessel_oracle():
    L, dt, n = 41, 0.005, 400
    u0 = np.zeros((L, L))
    u0[0, 0] = 1.0
    sol = heat.solve_heat(heat.HeatProblem(E.make_constant(1.0, domain=L), L, dt, n, u0))
    t = dt * n
    x = np.array([[0, 0], [1, 0], [2, 1], [3, 3]])
    exact = heat.bessel_kernel(t, x)
    got = sol.u[-1][tuple((x % L).T)]
    assert np.allclose(got, exact, atol=1e-2 * exact.max())
    assert sol.u[-1].sum() == pytest.approx(1.0, abs=1e-12)


def test_stability_bound_enforced():
    L = 8
    with pytest.raises(ValueError):
        heat.solve_heat(heat.HeatProblem(E.make_constant(1.0, domain=L), L, 1.0, 2, np.zeros((L, L))))


def test_static_corrector_constant_and_layered():
    cf = heat.solve_regularized_corrector(E.make_constant(1.0, domain=8), 0.0, 8)
    assert np.allclose(cf.sigma, 2 * np.eye(2), atol=1e-12)
    cf = heat.solve_regularized_corrector(E.make_static_layered((0.5, 1.0), domain=8), 0.0, 8)
    assert np.allclose(cf.sigma, np.diag([4 / 3, 1.5]), atol=1e-10)
    assert cf.residual["solver_residual"] < 1e-8
    assert heat.harmonicity_and_cocycle(cf)["holds"]


def test_regularized_dynamic_corrector_apriori():
    env = E.make_dynamical_percolation(0.7, seed=1, domain=6)
    cf = heat.solve_regularized_corrector(env, 0.2, 6, dt=0.05, t_window=4.0, stride=20)
    assert heat.apriori_check(cf)["holds"]
    assert heat.harmonicity_and_cocycle(cf)["holds"]
    assert np.all(np.linalg.eigvalsh(cf.sigma) > 0)


def test_J_kernel_against_quadrature():
    k = KernelPair(5.0, 2.5)
    for t in (0.0, 1.5, 9.0):
        assert heat.J_kernel(k, t) == pytest.approx(integrate.quad(lambda s: s * k.k(s), t, np.inf)[0], rel=1e-9)
    assert heat.J_integral(k, 0.5, 3.0) == pytest.approx(integrate.quad(lambda s: heat.J_kernel(k, s), 0.5, 3)[0],
                                                         rel=1e-9)


def test_energy_conversion_small_suite():
    recs = calibrate.energy_conversion_suite(3)
    assert recs and all(r["holds"] for r in recs)


def test_truncation_horizon():
    T = heat.truncation_horizon(0.1, 2, 1e-6)
    assert 4 * np.exp(-0.1 * T) / 0.1 == pytest.approx(1e-6)
