"""Cut-offs, the algebraic, energy and Dirichlet-conversion inequalities, the one-step
estimate and the iteration ladder for solutions of du/dt + L_t u = L_t f.

Inequalities with explicit constants are asserted directly.  Inequalities whose
constants are only known to exist report the implied constant, which is compared
against the calibration registry.

Fields live on an L-periodic torus with sites indexed 0..L-1; boxes B(0, R) are
{|x|_inf <= R} around the origin with R < L/2, and time runs on a uniform grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.special import polygamma

from . import registry
from .kernels import KernelPair
from .norms import norm_values, sobolev_exponents, trapezoid_weights

REL_TOL = 1e-12


# ---------------------------------------------------------------------------
# algebra


def tilde_power(a, lam):
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.abs(a) ** lam


def check_tilde_inequality(a, b, lam):
    """(|a|^{2l-2} + |b|^{2l-2}) (b - a)^2 <= 8 (b~^l - a~^l)^2 on arrays of triples."""
    a, b, lam = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(lam, float))
    if np.any(lam < 1):
        raise ValueError("lambda >= 1 required")
    lhs = (np.abs(a) ** (2 * lam - 2) + np.abs(b) ** (2 * lam - 2)) * (b - a) ** 2
    rhs = 8.0 * (tilde_power(b, lam) - tilde_power(a, lam)) ** 2
    ok = lhs <= rhs * (1 + REL_TOL) + 1e-300
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)
    return {"check": "tilde_inequality", "n": int(lhs.size), "violations": int((~ok).sum()),
            "max_ratio": float(ratio.max(initial=0.0)), "holds": bool(ok.all())}


def series_sum(rho, n_terms=None):
    """sum_{l>=1} l^2 rho^(1-l) by direct summation and by the closed form rho^2 (rho+1) / (rho-1)^3."""
    if rho <= 1:
        raise ValueError("rho > 1 required")
    if n_terms is None:
        n_terms = int(math.ceil(60 / math.log(rho))) + 50
    l = np.arange(1, n_terms + 1, dtype=np.float64)
    direct = float(np.sum(l ** 2 * rho ** (1 - l)))
    closed = rho ** 2 * (rho + 1) / (rho - 1) ** 3
    return direct, closed


# ---------------------------------------------------------------------------
# cut-offs


def bump(t):
    """1 for t <= 0, exp(1 - 1/(1 - t^2)) on (0, 1), 0 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    val = np.exp(1.0 - 1.0 / (1.0 - ti ** 2))
    return np.where(t <= 0, 1.0, np.where(inside, val, 0.0))


def bump_dot(t):
    t = np.asarray(t, dtype=np.float64)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    val = -2.0 * ti / (1.0 - ti ** 2) ** 2 * np.exp(1.0 - 1.0 / (1.0 - ti ** 2))
    return np.where(inside, val, 0.0)


@lru_cache(maxsize=1)
def bump_dot_sup():
    res = optimize.minimize_scalar(lambda t: float(bump_dot(t)), bounds=(1e-6, 1 - 1e-6), method="bounded",
                                   options={"xatol": 1e-12})
    return float(-res.fun)


def delta_l(l):
    return 6.0 / math.pi ** 2 / l ** 2


def tau(k, sigma, sigma_p):
    """tau_k = sigma' + Delta sum_{l > k} delta_l (tail summed exactly via the trigamma function)."""
    Delta = 0.5 * (sigma - sigma_p)
    tail = 6.0 / math.pi ** 2 * float(polygamma(1, k + 1))     # sum_{l >= k+1} l^-2
    return sigma_p + Delta * tail


def _check_sigmas(sigma, sigma_p):
    if not (1 <= sigma_p < sigma <= 2):
        raise ValueError(f"1 <= sigma' < sigma <= 2 required (got sigma'={sigma_p}, sigma={sigma})")


def radii(n, sigma, sigma_p, j_max):
    """Integer radii R_j = floor(sigma_j n), sigma_j = sigma' + 2^-j (sigma - sigma')."""
    return [int(math.floor((sigma_p + 2.0 ** (-j) * (sigma - sigma_p)) * n + 1e-12)) for j in range(j_max + 2)]


def max_rung(n, sigma, sigma_p, cap=60):
    """Largest j with R_j > R_{j+1}, i.e. the last box that still has a lattice shell for its cut-off."""
    R = radii(n, sigma, sigma_p, cap)
    best = 0
    for j in range(cap + 1):
        if R[j] > R[j + 1]:
            best = j
        else:
            break
    return best


@dataclass
class Cutoff:
    """kappa(t, x) = xi(t) eta(x) with eta linear in |x|_inf between radii R_in and R_out."""

    n: int
    j: int
    sigma: float
    sigma_p: float
    R_out: int
    R_in: int

    @property
    def Delta(self):
        return 0.5 * (self.sigma - self.sigma_p)

    @property
    def tau(self):
        return tau(self.j, self.sigma, self.sigma_p)

    def xi(self, t):
        return bump((np.asarray(t, float) / self.n ** 2 - self.tau) / self.Delta)

    def xi_dot(self, t):
        return bump_dot((np.asarray(t, float) / self.n ** 2 - self.tau) / self.Delta) / (self.Delta * self.n ** 2)

    @property
    def support_end(self):
        return (self.tau + self.Delta) * self.n ** 2

    def eta_of_cheb(self, cheb):
        cheb = np.asarray(cheb, dtype=np.float64)
        return np.clip((self.R_out - cheb) / (self.R_out - self.R_in), 0.0, 1.0)

    @property
    def grad_eta_sup(self):
        return 1.0 / (self.R_out - self.R_in)


@dataclass
class CutoffPair:
    inner: Cutoff          # kappa_1, box B_1 = B(0, inner.R_out)
    outer: Cutoff          # kappa_2, box B_2 = B(0, outer.R_out)
    rho: float
    M: float
    delta: float
    report: dict = field(default_factory=dict)


def make_cutoffs(n, j, sigma=2.0, sigma_p=1.0, rho=1.25, n_grid=10 ** 4) -> CutoffPair:
    """(kappa_{n,j}, kappa_{n,j-1}) with the adaptedness conditions verified on a time grid."""
    _check_sigmas(sigma, sigma_p)
    if n < 1 or j < 1:
        raise ValueError("n, j >= 1 required")
    if rho < 1:
        raise ValueError("rho >= 1 required")
    R = radii(n, sigma, sigma_p, j + 1)
    if not (R[j - 1] > R[j] > R[j + 1]):
        raise ValueError(f"rung j={j} too fine for n={n}: radii {R[j - 1]}, {R[j]}, {R[j + 1]} not strictly decreasing")
    inner = Cutoff(n, j, sigma, sigma_p, R[j], R[j + 1])
    outer = Cutoff(n, j - 1, sigma, sigma_p, R[j - 1], R[j])
    Delta = 0.5 * (sigma - sigma_p)
    M = max(1.0, bump_dot_sup() / Delta) * math.exp(rho / delta_l(j))
    delta = 1.0 / n ** 2
    t = np.linspace(0.0, 2.0 * n ** 2 * 1.05, n_grid)
    x1, x2 = inner.xi(t), outer.xi(t)
    xd = inner.xi_dot(t)
    b1 = x1 <= M * x2 ** rho * (1 + REL_TOL) + 1e-300
    b2 = np.abs(xd) <= delta * M * x2 ** rho * (1 + REL_TOL) + 1e-300
    # spatial conditions on a radial profile: supp eta_1 in B_1, eta_2 = 1 on B_1
    cheb = np.arange(0, R[j - 1] + 2)
    e1, e2 = inner.eta_of_cheb(cheb), outer.eta_of_cheb(cheb)
    supp1 = bool(np.all(e1[cheb > R[j]] == 0))
    supp2 = bool(np.all(e2[cheb > R[j - 1]] == 0))
    ones = bool(np.all(e2[cheb <= R[j]] == 1))
    inner_boundary = bool(e1[R[j]] == 0)
    # C^1: analytic derivative against central differences away from the seams
    h = 1e-6 * n ** 2
    tc = np.linspace(0.0, inner.support_end + n ** 2 * 0.1, 2001)
    fd = (inner.xi(tc + h) - inner.xi(tc - h)) / (2 * h)
    c1_err = float(np.abs(fd - inner.xi_dot(tc)).max() * inner.Delta * n ** 2)
    sig_j = sigma_p + 2.0 ** (-j) * (sigma - sigma_p)
    sig_j1 = sigma_p + 2.0 ** (-j - 1) * (sigma - sigma_p)
    rep = {"check": "cutoff_adapted", "n": n, "j": j, "rho": rho, "M": M, "delta": delta,
           "xi_bound": bool(b1.all()), "xi_dot_bound": bool(b2.all()), "n_grid": int(n_grid),
           "supp_eta1": supp1, "supp_eta2": supp2, "eta2_one_on_B1": ones, "eta1_inner_boundary_zero": inner_boundary,
           "xi_one_until": bool(np.all(inner.xi(t[t <= sigma_p * n ** 2]) == 1.0)),
           "xi_zero_after": bool(np.all(inner.xi(t[t >= sigma * n ** 2]) == 0.0)),
           "c1_fd_error": c1_err, "grad_eta1": inner.grad_eta_sup,
           "grad_eta1_nominal": 1.0 / ((sig_j - sig_j1) * n)}
    rep["holds"] = bool(rep["xi_bound"] and rep["xi_dot_bound"] and supp1 and supp2 and ones and inner_boundary
                        and rep["xi_one_until"] and rep["xi_zero_after"] and c1_err < 1e-4)
    return CutoffPair(inner, outer, rho, M, delta, rep)


# ---------------------------------------------------------------------------
# fields on the torus


def _coords(L):
    j = np.arange(L)
    return np.where(j < (L + 1) // 2, j, j - L)


def cheb_field(L, d):
    c = np.abs(_coords(L))
    grids = np.meshgrid(*[c] * d, indexing="ij")
    return np.max(np.stack(grids), axis=0)


def grad(g, d):
    """(d, ...) forward differences g(x + e_i) - g(x) along the last d axes."""
    return np.stack([np.roll(g, -1, axis=g.ndim - d + i) - g for i in range(d)], axis=-d - 1)


def edge_average(g, d):
    return np.stack([0.5 * (np.roll(g, -1, axis=g.ndim - d + i) + g) for i in range(d)], axis=-d - 1)


@dataclass
class MoserField:
    """Solution data on a time grid: u (nt, *shape), rates a and weights w (nt, d, *shape),
    the gradient of f on edges (d, *shape) and the time kernel zeta_n(t) = zeta(t/n^2)/n^2."""

    u: np.ndarray
    a: np.ndarray
    w: np.ndarray | None
    h: float
    grad_f: np.ndarray
    kernel: KernelPair
    n: int

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.d = self.u.ndim - 1
        self.L = self.u.shape[-1]
        self.t = self.h * np.arange(len(self.u))
        self.zeta = self.kernel.zeta(self.t / self.n ** 2) / self.n ** 2
        self.omega = trapezoid_weights(len(self.t), self.h) * self.zeta
        self.cheb = cheb_field(self.L, self.d)

    @property
    def zeta_l1(self):
        return self.kernel.zeta_l1

    @property
    def zeta_log_sup(self):
        return self.kernel.log_derivative_sup / self.n ** 2

    def zeta_at(self, t):
        return float(self.kernel.zeta(np.asarray(t) / self.n ** 2) / self.n ** 2)

    @property
    def grad_f_sup(self):
        return float(np.abs(self.grad_f).max())

    def box_mask(self, R):
        if 2 * R + 1 > self.L:
            raise ValueError(f"box radius {R} does not fit the torus side {self.L}")
        return self.cheb <= R

    def edge_mask(self, R):
        m = self.box_mask(R)
        return np.stack([m & np.roll(m, -1, axis=i) for i in range(self.d)])

    def l11(self, F, mask):
        """Unnormalized ||F||_{1,1;B,zeta} = int zeta sum_{x in B} |F|."""
        return float(self.omega @ np.abs(F[:, mask]).sum(axis=1))

    def nnorm(self, F, mask, p, q):
        """Normalized |||F|||_{p,q;B,zeta} on the grid."""
        return norm_values(np.abs(F[:, mask]), p, q, self.omega, normalized=True)

    def w_inv_norm(self, R, r, s):
        em = self.edge_mask(R)
        wv = self.w[:, em]
        if np.any(wv <= 0):
            return float("inf")
        return norm_values(1.0 / wv, r / 2, s / 2, self.omega, normalized=True)

    def dirichlet_a(self, g, eta):
        """E^{a,zeta}_{eta^2}(g) = int zeta sum_e av(eta^2) a |grad g|^2."""
        av = edge_average(eta ** 2, self.d)
        G = grad(g, self.d)
        per_t = (av[None] * self.a * G ** 2).reshape(len(self.t), -1).sum(axis=1)
        return float(self.omega @ per_t)

    def dirichlet_w(self, g):
        G = grad(g, self.d)
        per_t = (self.w * G ** 2).reshape(len(self.t), -1).sum(axis=1)
        return float(self.omega @ per_t)


def _grad_product_sup(F: MoserField, eta):
    return float(np.abs(F.grad_f * grad(eta, F.d)).max())


def _eta_field(F: MoserField, c: Cutoff):
    return c.eta_of_cheb(F.cheb)


# ---------------------------------------------------------------------------
# energy estimate and Dirichlet conversion


def _calibrated(name, implied, reg=None):
    try:
        val = registry.value(name, reg)
    except (KeyError, FileNotFoundError):
        return None, None
    return val, bool(implied <= val)


def check_energy_estimate(F: MoserField, cutoff: Cutoff, lam, reg=None):
    """max{sup_t zeta ||(xi eta u~^l)^2||_1, E^{a,zeta}_{eta^2}(xi u~^l)} against lambda^2 times the bracket."""
    if lam < 1:
        raise ValueError("lambda >= 1 required")
    eta = _eta_field(F, cutoff)
    B = F.box_mask(cutoff.R_out)
    xi = cutoff.xi(F.t)
    xid = cutoff.xi_dot(F.t)
    U = np.abs(F.u)
    ul = tilde_power(F.u, lam)
    sl = (xi[:, None] ** 2) * ((eta * ul) ** 2).reshape(len(F.t), -1)
    lhs_sup = float((F.zeta * sl[:, B.ravel()].sum(axis=1)).max())
    g = xi.reshape((-1,) + (1,) * F.d) * ul
    lhs_dir = F.dirichlet_a(g, eta)
    xi2 = xi.reshape((-1,) + (1,) * F.d) ** 2
    dxi2 = np.abs(2 * xi * xid).reshape((-1,) + (1,) * F.d)
    gf2 = F.grad_f_sup ** 2
    gfe = _grad_product_sup(F, eta)
    ge2 = cutoff.grad_eta_sup ** 2
    bracket = (gf2 * F.l11(xi2 * U ** (2 * lam - 2), B) + gfe * F.l11(xi2 * U ** (2 * lam - 1), B)
               + (ge2 + F.zeta_log_sup) * F.l11(xi2 * U ** (2 * lam), B) + F.l11(dxi2 * U ** (2 * lam), B))
    lhs = max(lhs_sup, lhs_dir)
    implied = lhs / (lam ** 2 * bracket) if bracket > 0 else (0.0 if lhs == 0 else float("inf"))
    cval, holds = _calibrated("c11", implied, reg)
    return {"check": "energy_estimate", "lambda": lam, "n": F.n, "R": cutoff.R_out, "lhs_sup": lhs_sup,
            "lhs_dirichlet": lhs_dir, "rhs_bracket": bracket, "ratio": implied, "registry": cval, "holds": holds}


def check_dirichlet_conversion(F: MoserField, cutoff: Cutoff, lam, c1, reg=None):
    """E^{w,zeta}(xi eta u~^l) against c1 lambda^2 [E^{a,zeta}_{eta^2}(xi u~^l) + three norm terms]."""
    if lam < 1:
        raise ValueError("lambda >= 1 required")
    if F.w is None:
        raise ValueError("weights required")
    eta = _eta_field(F, cutoff)
    B = F.box_mask(cutoff.R_out)
    inner_boundary = B & ~np.all(np.stack([np.roll(B, s, axis=i) for i in range(F.d) for s in (1, -1)]), axis=0)
    if np.any(eta[inner_boundary] != 0):
        raise ValueError("eta must vanish on the inner boundary of B")
    xi = cutoff.xi(F.t).reshape((-1,) + (1,) * F.d)
    xid = cutoff.xi_dot(F.t).reshape((-1,) + (1,) * F.d)
    U = np.abs(F.u)
    ul = tilde_power(F.u, lam)
    lhs = F.dirichlet_w(xi * eta * ul)
    bracket = (F.dirichlet_a(xi * ul, eta) + F.grad_f_sup ** 2 * F.l11(xi ** 2 * U ** (2 * lam - 2), B)
               + cutoff.grad_eta_sup ** 2 * F.l11(xi ** 2 * U ** (2 * lam), B) + F.l11(xid ** 2 * U ** (2 * lam), B))
    implied = lhs / (c1 * lam ** 2 * bracket) if bracket > 0 else (0.0 if lhs == 0 else float("inf"))
    cval, holds = _calibrated("c10", implied, reg)
    return {"check": "dirichlet_conversion", "lambda": lam, "n": F.n, "R": cutoff.R_out, "lhs": lhs,
            "rhs_bracket": bracket, "c1": c1, "ratio": implied, "registry": cval, "holds": holds}


# ---------------------------------------------------------------------------
# one-step estimate and iteration


@dataclass(frozen=True)
class Exponents:
    d: int
    alpha: float
    beta: float
    q: float

    def __post_init__(self):
        d = self.d
        upper = math.inf if d == 2 else 2 * (d - 1) / (d - 2)
        if not (1 < self.alpha < upper):
            raise ValueError(f"alpha in (1, {upper}) required")
        if not (0 < self.beta < 2):
            raise ValueError("beta in (0, 2) required")
        if not self.q > 1:
            raise ValueError("q > 1 required")
        if not self.theta < 1:
            raise ValueError("theta = beta / (2 q) < 1 required")

    @property
    def p_hat(self):
        return self.alpha / 2 * self.d / (self.d - 1)

    @property
    def q_hat(self):
        return self.beta / 2

    @property
    def theta(self):
        return self.q_hat / self.q

    @property
    def p(self):
        return 1.0 / (self.theta / self.p_hat + 1 - self.theta)

    @property
    def rs(self):
        return sobolev_exponents(self.d, self.alpha, self.beta)

    @property
    def rho_default(self):
        return 0.5 * (1 + min(self.p, self.q))

    @classmethod
    def from_rs(cls, d, r, s, q=2.0):
        from .norms import alpha_beta_from_rs

        a, b = alpha_beta_from_rs(d, r, s)
        return cls(d, a, b, q)


def iteration_N(rho):
    """N(rho) = inf{k >= 1 : rho^k > 2} - 1."""
    if rho <= 1:
        raise ValueError("rho > 1 required")
    k = 1
    while rho ** k <= 2:
        k += 1
    return k - 1


def one_step(F: MoserField, pair: CutoffPair, ex: Exponents, lam1, reg=None):
    """Both sides of the one-step estimate, gamma from the trigger norm and the prefactor without c2."""
    rho = pair.rho
    p, q = ex.p, ex.q
    if lam1 < 2:
        raise ValueError("lambda_1 >= 2 required")
    if not (1 <= rho < min(p, q)):
        raise ValueError(f"rho in [1, p ^ q) = [1, {min(p, q):.4g}) required")
    lam2 = lam1 / rho
    c_in, c_out = pair.inner, pair.outer
    B1, B2 = F.box_mask(c_in.R_out), F.box_mask(c_out.R_out)
    shp = (-1,) + (1,) * F.d
    xi1, xi2 = c_in.xi(F.t).reshape(shp), c_out.xi(F.t).reshape(shp)
    eta1, eta2 = _eta_field(F, c_in), _eta_field(F, c_out)
    U = np.abs(F.u)
    lhs = F.nnorm((xi1 * eta1) ** (2 / lam1) * U, B1, lam1 * p, lam1 * q)
    rhs = F.nnorm((xi2 * eta2) ** (2 / lam2) * U, B2, lam2 * p, lam2 * q)
    trigger = F.nnorm(xi2 ** (2 * rho) * U ** lam1, B1, 1, 1)
    gamma = 1 - 2 / lam1 if trigger < 1 else 1.0
    r, s = ex.rs
    winv = F.w_inv_norm(c_in.R_out, r, s)
    Gamma = (F.grad_f_sup ** 2 + _grad_product_sup(F, eta1) + c_in.grad_eta_sup ** 2 + F.zeta_log_sup)
    inf_zeta = F.zeta_at(c_in.support_end)
    nB1, nB2 = int(B1.sum()), int(B2.sum())
    A_mod = ((lam1 ** 2 * pair.M) ** 2 * F.zeta_l1 * max(1.0, winv) * nB2 / nB1
             * (Gamma + pair.delta) * (1 / inf_zeta + nB1 ** (2 / F.d)))
    if lhs == 0:
        log_c2 = -math.inf
    elif rhs == 0 or not math.isfinite(A_mod):
        log_c2 = math.inf if rhs == 0 else -math.inf
    else:
        log_c2 = lam1 * (math.log(lhs) - gamma * math.log(rhs)) - math.log(A_mod)
    out = {"check": "one_step", "n": F.n, "j": c_in.j, "lambda1": lam1, "lambda2": lam2, "p": p, "q": q,
           "rho": rho, "lhs": lhs, "rhs_norm": rhs, "trigger": trigger, "gamma": gamma,
           "gamma_branch": "small" if trigger < 1 else "large", "A_without_c2": A_mod, "w_inv_norm": winv,
           "Gamma": Gamma, "M": pair.M, "log_c2_implied": log_c2}
    try:
        cval = registry.value("c2", reg)
        out["registry"] = cval
        out["holds"] = bool(log_c2 <= math.log(cval) + 1e-9)
    except (KeyError, FileNotFoundError):
        out["registry"], out["holds"] = None, None
    return out


def iteration_constants(ex: Exponents, rho):
    """theta, c8 = 1/((rho-1)(1-theta)) and c9 = 1 + sum_{k>=2} k theta^k for the maximal inequality."""
    N = iteration_N(rho)
    pp, qq = rho ** N * ex.p, rho ** N * ex.q
    th = 1 - 1 / max(pp, qq)
    c8 = 1.0 / ((rho - 1) * (1 - th))
    c9 = 1 + th ** 2 * (2 - th) / (1 - th) ** 2
    return {"N": N, "p_prime": pp, "q_prime": qq, "theta": th, "c8": c8, "c9": c9}


def window_W(F: MoserField, ex: Exponents):
    """1 v max_{m in [n, 2n]} |||w^-1|||_{r/2,s/2;E(B_m),zeta_n} at the field's n."""
    r, s = ex.rs
    vals = [F.w_inv_norm(m, r, s) for m in range(F.n, 2 * F.n + 1)]
    return max([1.0] + vals)


@dataclass
class MoserLadder:
    rungs: list
    maximal: dict
    constants: dict

    def to_records(self):
        return [dict(r, record="rung") for r in self.rungs] + [dict(self.maximal, record="maximal")]


def iterate(F: MoserField, ex: Exponents, rho=None, sigma=2.0, sigma_p=1.0, k_max=None, reg=None) -> MoserLadder:
    """One-step estimates along the ladder k = N+1..k_max (box rung j = k - N) and the maximal inequality.

    The box ladder starts at the coarsest shell j = 1 for exponent k = N + 1, because the
    shells (sigma_k - sigma_{k+1}) n shrink below one lattice spacing at moderate n.
    """
    rho = ex.rho_default if rho is None else rho
    if not (1 < rho < min(ex.p, ex.q)):
        raise ValueError("rho in (1, p ^ q) required")
    if F.grad_f_sup > 1.0 / F.n + 1e-12:
        raise ValueError("||grad f||_inf <= 1/n required")
    if F.t[-1] < 2 * F.n ** 2 - 1e-9:
        raise ValueError("time window must cover [0, 2 n^2]")
    consts = iteration_constants(ex, rho)
    N = consts["N"]
    j_top = max_rung(F.n, sigma, sigma_p)
    k_top = N + j_top
    if k_max is None:
        k_max = k_top
    if k_max > k_top:
        raise ValueError(f"k_max={k_max} too large for grid resolution at n={F.n} (max {k_top})")
    nz = np.abs(F.u[F.u != 0])
    if len(nz) and rho ** k_max * 2 * float(np.abs(np.log(nz)).max()) > 700:
        raise ValueError(f"ladder exponent overflow: rho^k_max |log|u|| too large at k_max={k_max}")
    rungs = []
    for k in range(N + 1, k_max + 1):
        pair = make_cutoffs(F.n, k - N, sigma, sigma_p, rho)
        row = one_step(F, pair, ex, rho ** k, reg)
        row.update(k=k, adapted=pair.report["holds"], p_exp=rho ** k * ex.p, q_exp=rho ** k * ex.q)
        rungs.append(row)
    # maximal inequality over Q(n) against the (1,1)-norm on [0, 2 n^2] x B_2n
    n = F.n
    Q = F.t <= n ** 2 + 1e-9
    maxQ = float(np.abs(F.u[Q][:, F.box_mask(n)]).max())
    ind = (F.t <= 2 * n ** 2 + 1e-9).astype(float).reshape((-1,) + (1,) * F.d)
    N1 = F.nnorm(ind * F.u, F.box_mask(2 * n), 1, 1)
    W = window_W(F, ex)
    worst = max(N1, N1 ** consts["c9"]) if N1 > 0 else 0.0
    implied_c7 = maxQ / (W ** consts["c8"] * worst) if worst > 0 else (0.0 if maxQ == 0 else math.inf)
    maximal = {"check": "maximal_inequality", "n": n, "max_Q": maxQ, "l11_norm": N1, "W": W, **consts,
               "c7_implied": implied_c7}
    try:
        cval = registry.value("c7", reg)
        maximal["registry"] = cval
        maximal["holds"] = bool(implied_c7 <= cval)
    except (KeyError, FileNotFoundError):
        maximal["registry"], maximal["holds"] = None, None
    return MoserLadder(rungs, maximal, consts)


# ---------------------------------------------------------------------------
# corpus construction


def moser_field(env, n, L=None, dt=0.1, stride=None, kernel=None, component=0, horizon=None, terminal=None):
    """u on [0, 2 n^2] solving du/dt + L_t u = L_t f with f = -x_e / n, from exact cell steps.

    With terminal=None, u(t_end) = 0 and u is the finite-horizon corrector chi_e / n; a terminal
    field (*shape) gives instances with a nonzero homogeneous part (needed when a is constant).
    """
    from . import env as envmod
    from . import heat

    kernel = kernel or KernelPair(5.0, 2.5)
    L = L or 4 * n + 2
    H = horizon or envmod.KernelWeightSpec.for_tolerance(kernel.mu, 1e-6).horizon
    stride = stride or max(1, int(round(1.0 / dt)))
    T = 2.0 * n ** 2
    t_end = math.ceil((T + H) / (dt * stride)) * dt * stride
    term = None if terminal is None else np.asarray(terminal, dtype=np.float64)[None]
    sol = heat.solve_finite_horizon(env, L, dt, t_end, T, n, stride, kernel, H, component=component,
                                    keep_rates=True, scheme="exponential", terminal=term)
    gf = np.zeros((env.d,) + (L,) * env.d)
    gf[component] = -1.0 / n
    # f = -x_e / n is not periodic: on the wrap-around edges its gradient is not 1/n, but they lie
    # outside every box B(0, R) with 2R + 1 < L that the checks use
    return MoserField(sol.u[:, 0], sol.rates, sol.weights, sol.store_dt, gf, kernel, n)


def bump_terminal(L, d, centre, width, height=1.0):
    """Gaussian bump on the torus, used as terminal data."""
    c = _coords(L)
    grids = np.meshgrid(*[c] * d, indexing="ij")
    r2 = sum(((g - int(x0) + L // 2) % L - L // 2) ** 2 for g, x0 in zip(grids, centre))
    return height * np.exp(-0.5 * r2 / width ** 2)
