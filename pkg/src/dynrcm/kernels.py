"""Kernel pair (k, zeta): k_t = (1+t)^-mu, zeta(t) = 2^nu (1+t)^-nu on [0, inf).

K_t = k_t + int_t^inf (s - t) k_s ds, and the convolution-domination constant
c1 = sup_{s, r} int_0^s zeta(t/r) K_{s-t} dt / zeta(s/r).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class KernelPair:
    mu: float
    nu: float

    def k(self, t):
        return (1.0 + np.asarray(t, dtype=np.float64)) ** (-self.mu)

    def k_integral(self, a, b):
        """int_a^b k_t dt (b may be inf)."""
        m = self.mu
        return ((1.0 + np.asarray(a, float)) ** (1 - m) - (1.0 + np.asarray(b, float)) ** (1 - m)) / (m - 1)

    def zeta(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.where(t >= 0, 2.0 ** self.nu * (1.0 + np.maximum(t, 0.0)) ** (-self.nu), 0.0)

    def zeta_dot(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.where(t >= 0, -self.nu * 2.0 ** self.nu * (1.0 + np.maximum(t, 0.0)) ** (-self.nu - 1), 0.0)

    @property
    def zeta_l1(self):
        return 2.0 ** self.nu / (self.nu - 1)

    @property
    def log_derivative_sup(self):
        """sup_{t>0} |zeta'/zeta| = sup nu/(1+t) = nu."""
        return self.nu

    @property
    def zeta_inf_02(self):
        return (2.0 / 3.0) ** self.nu

    def big_K(self, t):
        t = 1.0 + np.asarray(t, dtype=np.float64)
        m = self.mu
        return t ** (-m) + t ** (2 - m) / ((m - 1) * (m - 2))

    def big_K_integral(self, a, b):
        """int_a^b K_t dt (b may be inf)."""
        m = self.mu
        F = lambda t: (1.0 + np.asarray(t, float)) ** (1 - m) / (m - 1) + \
            (1.0 + np.asarray(t, float)) ** (3 - m) / ((m - 1) * (m - 2) * (m - 3))
        return F(a) - F(b)

    def zeta_scaled(self, r, t):
        return zeta_scaled(self, r, t)

    def spec(self):
        return {"mu": self.mu, "nu": self.nu}


def polynomial_pair(mu, nu) -> KernelPair:
    mu, nu = float(mu), float(nu)
    if not mu > 4:
        raise ValueError(f"mu > 4 required (got mu={mu})")
    if not 2 < nu < mu - 2:
        raise ValueError(f"nu in (2, mu - 2) required (got nu={nu}, mu={mu})")
    return KernelPair(mu, nu)


def big_K(kernel: KernelPair, t):
    return kernel.big_K(t)


def big_K_quadrature(kernel: KernelPair, t):
    """Oracle: k_t + int_t^inf (s - t) k_s ds by adaptive quadrature."""
    val, _ = integrate.quad(lambda s: (s - t) * float(kernel.k(s)), t, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(kernel.k(t)) + val


def zeta_scaled(kernel: KernelPair, r, t):
    """zeta_r(t) = zeta(t / r^2) / r^2."""
    if r < 1:
        raise ValueError("r >= 1 required")
    return kernel.zeta(np.asarray(t, dtype=np.float64) / r ** 2) / r ** 2


def convolution_lhs(kernel: KernelPair, s, r):
    """int_0^s zeta(t/r) K_{s-t} dt."""
    if s <= 0:
        return 0.0
    m, nu = kernel.mu, kernel.nu
    c, q = 2.0 ** nu, 1.0 / ((m - 1) * (m - 2))
    f = lambda t: c * (1.0 + t / r) ** (-nu) * ((1.0 + s - t) ** (-m) + q * (1.0 + s - t) ** (2 - m))
    # K varies on scale 1 near t = s, zeta on scale r near 0
    pts = sorted({p for p in (max(s - 1.0, 0.0), min(r, s)) if 0 < p < s})
    val, _ = integrate.quad(f, 0.0, s, points=pts or None, epsabs=1e-12, epsrel=1e-10, limit=400)
    return val


def convolution_ratios(kernel: KernelPair, s_grid, r_set):
    s_grid = np.asarray(s_grid, dtype=np.float64)
    out = np.zeros((len(r_set), len(s_grid)))
    for i, r in enumerate(r_set):
        for j, s in enumerate(s_grid):
            out[i, j] = convolution_lhs(kernel, s, r) / float(kernel.zeta(s / r))
    return out


def check_convolution_bound(kernel: KernelPair, s_grid, r_set):
    """Estimated c1 as the sup of the domination ratio over the grid."""
    r_set = [float(r) for r in r_set]
    if any(r < 1 for r in r_set):
        raise ValueError("r >= 1 required")
    ratios = convolution_ratios(kernel, s_grid, r_set)
    i, j = np.unravel_index(np.argmax(ratios), ratios.shape)
    c1 = float(ratios[i, j])
    if not np.isfinite(c1):
        raise RuntimeError("convolution quadrature failed")
    return {"c1": c1, "argmax_r": r_set[i], "argmax_s": float(np.asarray(s_grid)[j]), "ratios": ratios}


def c1_estimate(kernel: KernelPair, s_max=100.0, r_set=(1, 2, 4, 8), n_grid=201):
    return check_convolution_bound(kernel, np.linspace(0.0, s_max, n_grid), r_set)["c1"]


def c1_for_scales(kernel: KernelPair, r_max, n_grid=201):
    """c1 covering r in [1, r_max] (geometric ladder), each r with s up to max(100, 20 r)."""
    rs = np.unique(np.concatenate([2.0 ** np.arange(0, np.floor(np.log2(max(r_max, 1))) + 1), [float(r_max)]]))
    best = 0.0
    for r in rs:
        s = np.linspace(0.0, max(100.0, 20.0 * r), n_grid)
        best = max(best, check_convolution_bound(kernel, s, [r])["c1"])
    return best
