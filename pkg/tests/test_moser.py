import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynrcm import moser
from dynrcm import env as E

reals = st.floats(min_value=-50, max_value=50, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(reals, reals, st.floats(min_value=1.0, max_value=6.0))
def test_tilde_inequality_property(a, b, lam):
    r = moser.check_tilde_inequality(np.array([a]), np.array([b]), lam)
    assert r["holds"]


def test_tilde_power_is_odd_and_increasing():
    x = np.linspace(-3, 3, 61)
    y = moser.tilde_power(x, 2.5)
    assert np.all(np.diff(y) > 0)
    assert np.allclose(y, -moser.tilde_power(-x, 2.5))


@pytest.mark.parametrize("rho", [1.05, 1.136, 1.5])
def test_series_closed_form(rho):
    direct, closed = moser.series_sum(rho)
    assert direct == pytest.approx(closed, rel=1e-10)


def test_bump_is_c1_step():
    t = np.linspace(-0.5, 1.5, 2001)
    b = moser.bump(t)
    assert np.all(b[t <= 0] == 1) and np.all(b[t >= 1] == 0)
    assert np.all(np.diff(b) <= 1e-15)
    fd = np.gradient(b, t)
    assert np.abs(fd - moser.bump_dot(t))[5:-5].max() < 1e-2
    assert moser.bump_dot_sup() >= np.abs(moser.bump_dot(t)).max() - 1e-9


def test_exponents_for_r_s_five():
    ex = moser.Exponents.from_rs(2, 5.0, 5.0, 2.0)
    assert ex.alpha == pytest.approx(2.5) and ex.beta == pytest.approx(10 / 7)
    assert ex.p == pytest.approx(14 / 11) and ex.q == 2.0
    assert 1 < ex.rho_default < min(ex.p, ex.q)
    c = moser.iteration_constants(ex, ex.rho_default)
    assert c["N"] == moser.iteration_N(ex.rho_default) == 5
    assert ex.rho_default ** 5 <= 2 < ex.rho_default ** 6
    assert c["c8"] == pytest.approx(1 / ((ex.rho_default - 1) * (1 - c["theta"])))


@pytest.mark.parametrize("n,j", [(4, 1), (8, 2), (8, 3), (16, 4)])
def test_cutoffs_adapted(n, j):
    pr = moser.make_cutoffs(n, j, rho=1.136)
    assert pr.report["holds"], pr.report
    assert pr.inner.R_out < pr.outer.R_out


def test_cutoff_rung_too_fine():
    with pytest.raises(ValueError, match="too fine"):
        moser.make_cutoffs(4, moser.max_rung(4, 2.0, 1.0) + 1)


def _constant_field(height, width=4.0, n=4):
    L = 4 * n + 2
    term = moser.bump_terminal(L, 2, (0, 0), width, height)
    return moser.moser_field(E.make_constant(1.0, domain=L), n, L=L, terminal=term)


def test_ladder_small_gamma_branch_and_registry():
    F = _constant_field(1.0)
    lad = moser.iterate(F, moser.Exponents.from_rs(2, 5.0, 5.0, 2.0))
    assert lad.rungs and all(r["gamma_branch"] == "small" for r in lad.rungs)
    assert all(r["holds"] for r in lad.rungs)
    assert lad.maximal["holds"]


def test_ladder_large_gamma_branch():
    F = _constant_field(1e3)
    lad = moser.iterate(F, moser.Exponents.from_rs(2, 5.0, 5.0, 2.0))
    assert all(r["gamma_branch"] == "large" and r["gamma"] == 1.0 for r in lad.rungs)
    assert all(np.isfinite(r["log_c2_implied"]) for r in lad.rungs)


def test_ladder_guards():
    ex = moser.Exponents.from_rs(2, 5.0, 5.0, 2.0)
    F = _constant_field(1.0)
    with pytest.raises(ValueError, match="too large for grid resolution"):
        moser.iterate(F, ex, k_max=50)
    tiny = _constant_field(1e-200, width=0.3)
    with pytest.raises(ValueError, match="exponent overflow"):
        moser.iterate(tiny, ex)


def test_energy_and_conversion_checks_hold():
    F = _constant_field(1.0)
    cut = moser.make_cutoffs(F.n, 1, rho=1.136).inner
    from dynrcm import kernels
    c1 = kernels.c1_for_scales(kernels.KernelPair(5.0, 2.5), 16)
    for lam in (1, 2):
        assert moser.check_energy_estimate(F, cut, lam)["holds"]
        assert moser.check_dirichlet_conversion(F, cut, lam, c1)["holds"]
