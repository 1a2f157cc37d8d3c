"""Effective diffusivity, invariance-principle tests, corrector sublinearity and the
moment comparison for T_e."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from statsmodels.stats.multitest import multipletests

from . import env as envmod
from . import heat, rng
from .kernels import KernelPair
from .norms import norm_values, trapezoid_weights, zeta_values

MIN_PATHS = 30


@dataclass
class DiffusivityEstimate:
    sigma: np.ndarray
    se: np.ndarray
    mode: str
    T: float
    mean_displacement: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"sigma": self.sigma.tolist(), "se": self.se.tolist(), "mode": self.mode, "T": self.T,
                "mean_displacement": self.mean_displacement.tolist(), **self.meta}


def _cov_over_T(D, T):
    return np.cov(D, rowvar=False, ddof=1).reshape(D.shape[1], D.shape[1]) / T


def jackknife(D, fn, n_groups=100):
    """Grouped delete-one jackknife: estimate and standard error of fn(D)."""
    n = len(D)
    g = min(n_groups, n)
    groups = np.array_split(np.arange(n), g)
    full = fn(D)
    reps = np.stack([fn(np.delete(D, idx, axis=0)) for idx in groups])
    se = np.sqrt((g - 1) / g * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    return full, se


def estimate_sigma_mc(displacements, T, mode="quenched", n_groups=100) -> DiffusivityEstimate:
    """Sigma_hat = Cov(X_T - X_0)/T with jackknife standard errors."""
    D = np.asarray(displacements, dtype=np.float64)
    if len(D) < MIN_PATHS:
        raise ValueError(f"ensemble too small: {len(D)} < {MIN_PATHS} paths")
    sig, se = jackknife(D, lambda x: _cov_over_T(x, T), n_groups)
    sig = 0.5 * (sig + sig.T)
    return DiffusivityEstimate(sig, se, mode, float(T), D.mean(axis=0), {"n_paths": len(D)})


def sigma_agreement(target, est: DiffusivityEstimate, n_se=3.0, other_se=None):
    """|Sigma_hat - target| <= n_se * combined s.e., entrywise."""
    target = np.asarray(target, dtype=np.float64)
    se = est.se if other_se is None else np.sqrt(est.se ** 2 + np.asarray(other_se) ** 2)
    dev = np.abs(est.sigma - target)
    return bool(np.all(dev <= n_se * se + 1e-12)), (dev / np.maximum(se, 1e-300)).tolist()


# ---------------------------------------------------------------------------
# invariance principle


def ip_test(displacements, times, n, sigma, directions, alpha=0.01, jitter_seed=None, lattice=True):
    """KS tests of v.X_{tn}/sqrt(n) against N(0, t v.Sigma v) plus increment-independence tests.

    displacements: (n_paths, n_times, d) values of X_{t n} - X_0 for t in times.
    Integer lattice data get an independent uniform jitter on [-1/2, 1/2]^d before
    scaling, whose variance |v|^2/12 is added to the reference law.
    """
    X = np.asarray(displacements, dtype=np.float64)
    m, nt, d = X.shape
    sigma = np.asarray(sigma, dtype=np.float64)
    if lattice:
        seed = 0 if jitter_seed is None else jitter_seed
        idx = np.arange(m)
        U = np.stack([np.stack([rng.uniform(seed, rng.STREAM_JITTER, idx, j, i) - 0.5 for i in range(d)], axis=1)
                      for j in range(nt)], axis=1)
        X = X + U
    rows, pvals = [], []
    for j, t in enumerate(times):
        for v in directions:
            v = np.asarray(v, dtype=np.float64)
            y = X[:, j] @ v / math.sqrt(n)
            var = t * v @ sigma @ v + (v @ v / 12.0 / n if lattice else 0.0)
            res = stats.kstest(y, "norm", args=(0.0, math.sqrt(var)))
            rows.append({"test": "ks", "t": float(t), "v": v.tolist(), "statistic": float(res.statistic),
                         "p": float(res.pvalue), "mean": float(y.mean()), "var": float(y.var()), "ref_var": float(var)})
            pvals.append(res.pvalue)
    # independence of increments over [0, t_0 n] and [t_0 n, t_1 n]
    for j in range(1, nt):
        for v in directions:
            v = np.asarray(v, dtype=np.float64)
            a = X[:, 0] @ v
            b = (X[:, j] - X[:, 0]) @ v
            r, p = stats.pearsonr(a, b)
            rows.append({"test": "increment_corr", "t": float(times[j]), "v": v.tolist(), "statistic": float(r),
                         "p": float(p)})
            pvals.append(p)
    reject, p_adj, _, _ = multipletests(pvals, alpha=alpha, method="holm")
    for row, rj, pa in zip(rows, reject, p_adj):
        row["p_holm"] = float(pa)
        row["reject"] = bool(rj)
    return {"check": "invariance_principle", "n": n, "alpha": alpha, "rows": rows,
            "rejected": bool(np.any(reject)), "n_paths": m}


def ballistic_control(n_paths, times, n, d=2, speed=1.0):
    """Deterministic straight-line displacements X_t = speed t e_1 sampled at t n."""
    X = np.zeros((n_paths, len(times), d))
    for j, t in enumerate(times):
        X[:, j, 0] = np.round(speed * t * n)
    return X


def brownian_control(n_paths, times, n, sigma, seed=0):
    """Gaussian displacements with covariance t n Sigma (harness self-test)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    d = len(sigma)
    C = np.linalg.cholesky(sigma)
    idx = np.arange(n_paths)
    X = np.zeros((n_paths, len(times), d))
    prev_t, prev = 0.0, np.zeros((n_paths, d))
    for j, t in enumerate(times):
        z = np.stack([rng.normal(seed, rng.STREAM_PATH, idx, j, i) for i in range(d)], axis=1)
        prev = prev + math.sqrt((t - prev_t) * n) * z @ C.T
        X[:, j] = prev
        prev_t = t
    return X


# ---------------------------------------------------------------------------
# sublinearity of the corrector


@dataclass
class SublinearityProfile:
    n: list
    max_profile: list
    norm_profile: list
    slopes: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"n": self.n, "max_profile": self.max_profile, "norm_profile": self.norm_profile,
                "slopes": self.slopes, **self.meta}


def loglog_slope(n, values):
    n, v = np.asarray(n, float), np.asarray(values, float)
    if np.any(v <= 0):
        return float("-inf") if np.all(v <= 0) else float("nan")
    return float(np.polyfit(np.log(n), np.log(v), 1)[0])


def profile_from_chi(chi, store_dt, n_list, kernel: KernelPair, window_factor=4.0):
    """max_{Q(n)} |chi|/n and n^-(d+1) ||1_{[0, c n^2]} chi||_{1,1;B_n,zeta_n} from a stored field.

    chi: (n_store, d, L, ..., L) with chi(0, 0) = 0, times k * store_dt. B_n = [-n, n]^d, Q(n) = B_n x [0, n^2].
    """
    n_store, d = chi.shape[:2]
    L = chi.shape[-1]
    mags = np.sqrt((chi.astype(np.float64) ** 2).sum(axis=1))       # |chi| per (t, x)
    mx, nm = [], []
    for n in n_list:
        if 2 * n + 1 > L:
            raise ValueError(f"torus side {L} too small for n={n}")
        sl = np.arange(-n, n + 1) % L
        sub = mags[(slice(None),) + np.ix_(*[sl] * d)].reshape(n_store, -1)
        kq = int(math.floor(n * n / store_dt + 1e-9))
        kw = int(math.floor(window_factor * n * n / store_dt + 1e-9))
        if kw >= n_store:
            raise ValueError(f"stored window too short for n={n}")
        mx.append(float(sub[:kq + 1].max()) / n)
        omega = trapezoid_weights(kw + 1, store_dt) * zeta_values(kernel, store_dt * np.arange(kw + 1), r=n)
        nm.append(norm_values(sub[:kw + 1], 1, 1, omega) / n ** (d + 1))
    return mx, nm


def sublinearity_profile(env, eps, n_list, kernel: KernelPair, L=None, dt=0.1, window_factor=4.0, tol=1e-6,
                         dtype=np.float32, allowance=0.1):
    n_list = sorted(int(n) for n in n_list)
    L = L or 2 * n_list[-1] + 2
    if L < 2 * n_list[-1] + 1:
        raise ValueError("torus too small")
    T = window_factor * n_list[-1] ** 2
    stride = max(1, int(round(1.0 / dt)))
    cf = heat.solve_regularized_corrector(env, eps, L, dt=dt, t_window=T, tol=tol, stride=stride, dtype=dtype)
    if cf.static:
        chi = np.broadcast_to(cf.chi, (int(T) + 2,) + cf.chi.shape[1:])
        store_dt = 1.0
    else:
        chi, store_dt = cf.chi, cf.store_dt
    mx, nm = profile_from_chi(chi, store_dt, n_list, kernel, window_factor)
    slopes = {"max": loglog_slope(n_list, mx), "norm": loglog_slope(n_list, nm)}
    # negative slope with an allowance: the largest n may exceed the smallest by at most 10%
    trend = {k: bool(v[-1] <= (1 + allowance) * v[0] and (s < 0 or all(x == 0 for x in v)))
             for k, v, s in (("max", mx, slopes["max"]), ("norm", nm, slopes["norm"]))}
    return SublinearityProfile(n_list, mx, nm, slopes,
                               {"eps": eps, "L": L, "dt": dt, "window": T, "trend_decreasing": trend,
                                "sigma": cf.sigma.tolist(), "apriori": cf.apriori})


# ---------------------------------------------------------------------------
# moments of T_e


def check_moment_lemma(env, q, n_samples=10 ** 4, seed=0, mu=5.0, tolerance=1e-10, n_se=3.0):
    """E T^{q+1} <= (E a^-q)^{(q+1)/q} and E w^-q <= (int_0^H k)^-q E a^-q, within combined MC error.

    The first bound is only asserted for time-ergodic environments (``applicable``).
    """
    est = envmod.moment_estimates(env, q, q + 1, n_samples, seed, mu, tolerance)
    lhs, lhs_se = est["T_theta"]["mean"], est["T_theta"]["se"]
    # the comparison needs ergodicity under time shifts alone; a static non-constant field lacks it
    applicable = bool(not env.is_static or env.model == "constant")
    out = {"check": "moment_lemma", "q": q, "n_samples": n_samples, "lhs": lhs, "lhs_se": lhs_se,
           "applicable": applicable}
    spec = envmod.KernelWeightSpec.for_tolerance(mu, tolerance)
    jensen_c = ((1.0 - (1.0 + spec.horizon) ** (1.0 - mu)) / (mu - 1.0)) ** (-q)   # (int_0^H k)^-q
    if est["a_inv_q"]["diverging"]:
        out.update(rhs=float("inf"), rhs_se=float("nan"), holds=True, vacuous=True,
                   jensen={"holds": True, "vacuous": True})
        return out
    m, s = est["a_inv_q"]["mean"], est["a_inv_q"]["se"]
    ex = (q + 1) / q
    rhs = m ** ex
    rhs_se = ex * m ** (ex - 1) * s                   # delta method
    comb = math.hypot(lhs_se, rhs_se)
    w = est["w_inv_q"]
    j_rhs, j_se = jensen_c * m, jensen_c * s
    out.update(rhs=rhs, rhs_se=rhs_se, holds=bool(lhs <= rhs + n_se * comb + 1e-12 * rhs), vacuous=False,
               exact=bool(lhs_se <= 1e-12 * lhs and rhs_se <= 1e-12 * rhs),
               jensen={"lhs": w["mean"], "lhs_se": w["se"], "rhs": j_rhs, "rhs_se": j_se, "c": jensen_c,
                       "holds": bool(w["mean"] <= j_rhs + n_se * math.hypot(w["se"], j_se) + 1e-12 * j_rhs)})
    return out
