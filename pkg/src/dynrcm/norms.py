"""Space-time norms ||f||_{p,q;B,zeta}, their normalized versions, weighted Dirichlet
energies and numerical checks of the lattice Sobolev and interpolation inequalities.

Time integrals use trapezoid weights on a uniform grid multiplied by zeta at the
grid times; the normalization uses the same quadrature mass of zeta, so that
constant fields have normalized norm exactly 1 and Hoelder-type inequalities hold
exactly for the discretized norms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import KernelPair
from .lattice import Box, EdgeArray, edge_set, field_on, grad_edges

REL_TOL = 1e-9


@dataclass
class SpaceTimeField:
    """values[i, j] = f at time t0 + i*dt and site/edge j of the domain."""

    values: np.ndarray
    t0: float = 0.0
    dt: float = 1.0
    domain: Box | EdgeArray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.dt <= 0:
            raise ValueError("grid dt must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def nt(self):
        return self.values.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def size(self):
        return self.values.shape[1]

    def map(self, fn):
        return SpaceTimeField(fn(self.values), self.t0, self.dt, self.domain)


def trapezoid_weights(nt, dt):
    if nt == 1:
        return np.ones(1)
    w = np.full(nt, float(dt))
    w[0] = w[-1] = 0.5 * dt
    return w


@dataclass(frozen=True)
class NormSpec:
    p: float
    q: float
    zeta: KernelPair | Callable | None = None
    r: float | None = None
    normalized: bool = False

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p, q > 0 required")


def zeta_values(zeta, times, r=None):
    """zeta (or zeta_r(t) = zeta(t/r^2)/r^2) at the grid times; None means zeta = 1."""
    t = np.asarray(times, dtype=np.float64)
    if zeta is None:
        return np.ones_like(t)
    fn = zeta.zeta if isinstance(zeta, KernelPair) else zeta
    if r is None:
        return np.asarray(fn(t), dtype=np.float64) * np.ones_like(t)
    if r < 1:
        raise ValueError("r >= 1 required")
    return np.asarray(fn(t / r ** 2), dtype=np.float64) / r ** 2 * np.ones_like(t)


def time_measure(f: SpaceTimeField, zeta, r=None):
    return trapezoid_weights(f.nt, f.dt) * zeta_values(zeta, f.times, r)


def _spatial(v, p):
    if np.isinf(p):
        return v.max(axis=1)
    return (v ** p).sum(axis=1) ** (1.0 / p)


def norm_values(values, p, q, omega, normalized=False, size=None):
    """Core evaluator on an (nt, m) array with time measure omega (nt,)."""
    vals = np.abs(np.asarray(values, dtype=np.float64))
    m = vals.shape[1] if size is None else size
    M = vals.max(initial=0.0)
    if M == 0:
        return 0.0
    v = vals / M
    s = _spatial(v, p)
    if normalized and not np.isinf(p):
        s = s / m ** (1.0 / p)
    if np.isinf(q):
        return float(s[omega > 0].max(initial=0.0) * M)
    mass = omega.sum()
    if mass <= 0:
        raise ValueError("zeta has no mass on the time grid")
    out = (omega * s ** q).sum() ** (1.0 / q)
    if normalized:
        out /= mass ** (1.0 / q)
    return float(out * M)


def st_norm(f: SpaceTimeField, spec: NormSpec, size=None):
    omega = time_measure(f, spec.zeta, spec.r)
    return norm_values(f.values, spec.p, spec.q, omega, spec.normalized, size)


def refinement_check(fine: SpaceTimeField, spec: NormSpec, tol=1e-4):
    """Compare the norm on a grid with the norm on every other grid point."""
    coarse = SpaceTimeField(fine.values[::2], fine.t0, 2 * fine.dt, fine.domain)
    a, b = st_norm(fine, spec), st_norm(coarse, spec)
    rel = abs(a - b) / max(abs(a), 1e-300)
    if rel > tol:
        raise ValueError(f"time grid too coarse: refinement changes norm by {rel:.2e}")
    return rel


# ---------------------------------------------------------------------------
# Dirichlet energies


def dirichlet_energy(f_values, f_box: Box, w, edges: EdgeArray):
    """sum_e w(e) (grad f(e))^2 for a field on f_box extended by zero."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("negative weight")
    g = grad_edges(f_values, f_box, edges)
    return float(np.sum(w * g * g))


def dirichlet(f: SpaceTimeField, w: SpaceTimeField, B: Box, zeta=None, r=None, t_index=None):
    """E^w_{t,B}(f_t) at one grid index, or its zeta-integrated form.

    f lives on the box f.domain (zero outside); w on edge_set(B) in its order.
    """
    edges = w.domain if isinstance(w.domain, EdgeArray) else edge_set(B)
    if np.any(w.values < 0):
        raise ValueError("negative weight")
    g = np.stack([grad_edges(f.values[i], f.domain, edges) for i in range(f.nt)])
    per_t = np.sum(w.values * g * g, axis=1)
    if t_index is not None:
        return float(per_t[t_index])
    return float(np.sum(time_measure(f, zeta, r) * per_t))


# ---------------------------------------------------------------------------
# inequality checks


def _report(check, lhs, rhs, **params):
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
    return {"check": check, "params": params, "lhs": float(lhs), "rhs": float(rhs), "ratio": float(ratio),
            "holds": bool(lhs <= rhs * (1 + REL_TOL) + 1e-300)}


def check_interpolation(f: SpaceTimeField, p, q, p1, p2, q1, q2, theta, zeta=None, r=None, normalized=True):
    """||f||_{p,q} <= ||f||_{p1,q1}^theta ||f||_{p2,q2}^(1-theta); p or q None means implied by theta."""
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x
    if not 0 <= theta <= 1:
        raise ValueError("theta in [0, 1] required")
    if p is None:
        p = 1.0 / (theta * inv(p1) + (1 - theta) * inv(p2))
    if q is None:
        q = 1.0 / (theta * inv(q1) + (1 - theta) * inv(q2))
    if abs(inv(p) - theta * inv(p1) - (1 - theta) * inv(p2)) > 1e-12 or \
            abs(inv(q) - theta * inv(q1) - (1 - theta) * inv(q2)) > 1e-12:
        raise ValueError("exponent relation 1/p = theta/p1 + (1-theta)/p2 (same for q) violated")
    n = lambda a, b: st_norm(f, NormSpec(a, b, zeta, r, normalized))
    lhs = n(p, q)
    rhs = n(p1, q1) ** theta * n(p2, q2) ** (1 - theta)
    return _report("interpolation", lhs, rhs, p=p, q=q, p1=p1, p2=p2, q1=q1, q2=q2, theta=theta)


def check_monotonicity(f: SpaceTimeField, exponents=(0.5, 1.0, 2.0, 4.0), zeta=None, r=None):
    """Normalized norms non-decreasing in p and in q on the exponent lattice."""
    ex = list(exponents)
    vals = np.array([[st_norm(f, NormSpec(p, q, zeta, r, True)) for q in ex] for p in ex])
    tol = REL_TOL * np.abs(vals).max(initial=1.0)
    ok_p = bool(np.all(np.diff(vals, axis=0) >= -tol))
    ok_q = bool(np.all(np.diff(vals, axis=1) >= -tol))
    return {"check": "norm_monotonicity", "params": {"exponents": ex}, "values": vals.tolist(),
            "holds": ok_p and ok_q}


def check_l1_sobolev(values, box: Box, c_d=None):
    """(sum |f|^{d/(d-1)})^{(d-1)/d} <= c(d) sum_edges |grad f|, f zero outside box."""
    d = box.d
    v = np.asarray(values, dtype=np.float64)
    lhs = np.sum(np.abs(v) ** (d / (d - 1))) ** ((d - 1) / d)
    grad = np.sum(np.abs(grad_edges(v, box, edge_set(box))))
    ratio = 0.0 if lhs == 0 else (lhs / grad if grad > 0 else float("inf"))
    out = {"check": "l1_sobolev", "params": {"d": d}, "lhs": float(lhs), "gradient_sum": float(grad),
           "ratio": float(ratio)}
    if c_d is not None:
        out["rhs"] = float(c_d * grad)
        out["holds"] = bool(lhs <= c_d * grad * (1 + REL_TOL))
    return out


def check_box_sobolev(values, box: Box, c_prime=None):
    """sum_B |f - mean| <= c'(d) |B|^{1/d} sum_{edges inside B} |grad f|."""
    d = box.d
    v = np.asarray(values, dtype=np.float64)
    lhs = np.sum(np.abs(v - v.mean()))
    inner = edge_set(box, both=True)
    grad = np.sum(np.abs(grad_edges(v, box, inner)))
    scale = box.size ** (1.0 / d) * grad
    ratio = 0.0 if lhs <= 1e-12 * max(np.abs(v).max(initial=0), 1e-300) * box.size else (
        lhs / scale if scale > 0 else float("inf"))
    out = {"check": "box_sobolev", "params": {"d": d, "shape": list(box.shape)}, "lhs": float(lhs),
           "gradient_sum": float(grad), "ratio": float(ratio)}
    if c_prime is not None:
        out["rhs"] = float(c_prime * scale)
        out["holds"] = bool(lhs <= c_prime * scale * (1 + REL_TOL) + 1e-12)
    return out


def sobolev_exponents(d, alpha, beta):
    """(r, s) with (alpha-1)/alpha (d-1)/d + 1/r = 1/2 and 1/s + 1/2 = 1/beta."""
    if d < 2:
        raise ValueError("d >= 2 required")
    amax = np.inf if d == 2 else 2 * (d - 1) / (d - 2)
    if not 1 < alpha < amax:
        raise ValueError(f"alpha in (1, {amax}) required")
    if not 0 < beta < 2:
        raise ValueError("beta in (0, 2) required")
    inv_r = 0.5 - (alpha - 1) / alpha * (d - 1) / d
    inv_s = 1.0 / beta - 0.5
    return 1.0 / inv_r, 1.0 / inv_s


def alpha_beta_from_rs(d, r, s):
    inv_a = (0.5 + 1.0 / r - 1.0 / d) * d / (d - 1)
    return 1.0 / inv_a, 1.0 / (1.0 / s + 0.5)


def c0_bound(d, alpha, beta, c_d=None):
    """Explicit valid c0: alpha c(d) (2d)^{1/p} 2^{1/2 + 1/r}, 1/p = (alpha-1)(d-1)/(alpha d)."""
    r, _ = sobolev_exponents(d, alpha, beta)
    c_d = 1.0 / (2 * d) if c_d is None else c_d
    inv_p = (alpha - 1) * (d - 1) / (alpha * d)
    return alpha * c_d * (2 * d) ** inv_p * 2.0 ** (0.5 + 1.0 / r)


def check_weighted_sobolev(f: SpaceTimeField, w: SpaceTimeField, alpha, beta, zeta=None, r_scale=None, c0=None):
    """Both forms of the weighted space-time Sobolev inequality on B = f.domain.

    f is extended by zero outside B; w is given on edge_set(B) (w.domain) and
    must be positive there, otherwise the right-hand side is infinite.
    """
    B = f.domain
    d = B.d
    r, s = sobolev_exponents(d, alpha, beta)
    if c0 is None:
        c0 = c0_bound(d, alpha, beta)
    omega = time_measure(f, zeta, r_scale)
    energy = dirichlet(f, w, B, zeta, r_scale)
    params = {"d": d, "alpha": alpha, "beta": beta, "r": r, "s": s, "c0": c0}
    lhs = norm_values(f.values, alpha * d / (d - 1), beta, omega)
    if np.any(w.values <= 0):
        return {"check": "weighted_sobolev", "params": params, "lhs": lhs, "rhs": float("inf"),
                "vacuous": True, "holds": True, "implied_c0": 0.0, "tailored": None}
    winv = w.values ** -0.5
    wnorm = norm_values(winv, r, s, omega)
    rhs_core = wnorm * np.sqrt(energy)
    implied = lhs / rhs_core if rhs_core > 0 else (0.0 if lhs == 0 else float("inf"))
    out = _report("weighted_sobolev", lhs, c0 * rhs_core, **params)
    out["implied_c0"] = float(implied)
    out["energy"] = energy
    out["w_norm"] = wnorm
    # tailored normalized form for f^2
    p_hat, q_hat = alpha * d / (2 * (d - 1)), beta / 2
    t_lhs = norm_values(f.values ** 2, p_hat, q_hat, omega, normalized=True, size=B.size)
    w_inv_norm = norm_values(w.values ** -1.0, r / 2, s / 2, omega, normalized=True)
    t_rhs = 2 * d * c0 ** 2 * B.size ** (2.0 / d) * energy / B.size * w_inv_norm
    out["tailored"] = _report("tailored_sobolev", t_lhs, t_rhs, p_hat=p_hat, q_hat=q_hat)
    out["holds"] = bool(out["holds"] and out["tailored"]["holds"])
    return out


def set_poincare_ratio(mask):
    """2|A||A^c| / (|B|^{1+1/d} |boundary of A inside B|) for a boolean mask on a box."""
    mask = np.asarray(mask, dtype=bool)
    d = mask.ndim
    n = mask.size
    a = mask.sum()
    bd = sum(int(np.sum(np.diff(mask.astype(np.int8), axis=i) != 0)) for i in range(d))
    if a == 0 or a == n:
        return 0.0
    return 2.0 * a * (n - a) / (n ** (1 + 1 / d) * bd)
