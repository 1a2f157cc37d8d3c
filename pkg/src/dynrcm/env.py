"""Seeded, lazily generated time-dependent conductance environments a_t(e) in [0, 1].

Edges are given as (base site, axis) pairs; the edge joins base and base + e_axis.
Every model exposes

* ``rate(base, axis, t)``: vectorized point queries;
* ``pieces(base, axis, t0, t1)``: the trajectory on [t0, t1] as piecewise-linear
  pieces (constant pieces have equal end values), from which cumulative rates,
  unit times T_e and kernel weights w_t(e) are computed in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .lattice import Edge

MODELS = ("constant", "dyn-percolation", "exclusion", "langevin", "static-layered")


def _ragged_arange(counts):
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - starts


def _edges_args(base, axis):
    base = np.atleast_2d(np.asarray(base, dtype=np.int64))
    axis = np.broadcast_to(np.asarray(axis, dtype=np.int64), (len(base),)).copy()
    return base, axis


def _times(t, n):
    return np.broadcast_to(np.asarray(t, dtype=np.float64), (n,)).astype(np.float64)


@dataclass
class Pieces:
    """Piecewise-linear trajectories of n edges, sorted by (owner, start)."""

    owner: np.ndarray
    start: np.ndarray
    end: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    n: int

    def __post_init__(self):
        order = np.lexsort((self.start, self.owner))
        for name in ("owner", "start", "end", "v0", "v1"):
            setattr(self, name, np.asarray(getattr(self, name))[order])

    def areas(self):
        return (self.end - self.start) * 0.5 * (self.v0 + self.v1)

    def integral(self):
        return np.bincount(self.owner, weights=self.areas(), minlength=self.n)

    def kernel_integral(self, t_origin, mu):
        """Per owner: integral of (1 + s - t)^(-mu) a(s) ds over its pieces."""
        t = np.asarray(t_origin, dtype=np.float64)[self.owner]
        u0 = 1.0 + self.start - t
        u1 = 1.0 + self.end - t
        length = self.end - self.start
        slope = np.divide(self.v1 - self.v0, length, out=np.zeros_like(length), where=length > 0)
        # a(s) = alpha + slope * (1 + s - t) with alpha chosen to match v0 at the start
        alpha = self.v0 - slope * u0
        f1 = (u0 ** (1 - mu) - u1 ** (1 - mu)) / (mu - 1)
        f2 = (u0 ** (2 - mu) - u1 ** (2 - mu)) / (mu - 2)
        return np.bincount(self.owner, weights=alpha * f1 + slope * f2, minlength=self.n)


class Environment:
    model = "abstract"

    def __init__(self, d=2, seed=0, period=None):
        if d < 2:
            raise ValueError("d >= 2 required")
        self.d = int(d)
        self.seed = int(seed)
        self.period = None if period is None else int(period)
        if self.period is not None and self.period < 2:
            raise ValueError("torus side must be >= 2")

    # subclasses implement _rate and _pieces on reduced coordinates
    def reduce(self, base):
        return base % self.period if self.period is not None else base

    def rate(self, base, axis, t):
        base, axis = _edges_args(base, axis)
        out = self._rate(self.reduce(base), axis, _times(t, len(axis)))
        return out

    def pieces(self, base, axis, t0, t1) -> Pieces:
        base, axis = _edges_args(base, axis)
        n = len(axis)
        t0, t1 = _times(t0, n), _times(t1, n)
        if np.any(t1 < t0):
            raise ValueError("t0 <= t1 required")
        return self._pieces(self.reduce(base), axis, t0, t1)

    def rate_field(self, t, origin=None, shape=None):
        """Rates of all edges (x, x + e_i) for x in a box, shape (d, *shape)."""
        if shape is None:
            if self.period is None:
                raise ValueError("shape required for infinite environments")
            shape = (self.period,) * self.d
        origin = np.zeros(self.d, dtype=np.int64) if origin is None else np.asarray(origin, dtype=np.int64)
        grids = np.meshgrid(*[np.arange(o, o + s) for o, s in zip(origin, shape)], indexing="ij")
        sites = np.stack([g.ravel() for g in grids], axis=1)
        out = np.empty((self.d,) + tuple(shape))
        for i in range(self.d):
            out[i] = self.rate(sites, i, t).reshape(shape)
        return out

    def edge_keys(self, base, axis):
        return rng.hash_keys(self.seed, rng.STREAM_EDGE, axis, *base.T)

    def spec(self):
        return {"model": self.model, "d": self.d, "seed": self.seed,
                "domain": {"mode": "torus", "L": self.period} if self.period else {"mode": "infinite"},
                "params": self.params()}

    def params(self):
        return {}

    @property
    def is_static(self):
        return False

    @property
    def piecewise_constant(self):
        return True


class ConstantEnvironment(Environment):
    model = "constant"

    def __init__(self, c=1.0, d=2, seed=0, period=None):
        super().__init__(d, seed, period)
        if not 0.0 <= c <= 1.0:
            raise ValueError("constant conductance must lie in [0, 1]")
        self.c = float(c)

    def params(self):
        return {"c": self.c}

    @property
    def is_static(self):
        return True

    def _rate(self, base, axis, t):
        return np.full(len(axis), self.c)

    def _pieces(self, base, axis, t0, t1):
        n = len(axis)
        v = np.full(n, self.c)
        return Pieces(np.arange(n), t0, t1, v, v.copy(), n)

    def rate_field(self, t, origin=None, shape=None):
        shape = shape if shape is not None else (self.period,) * self.d
        return np.full((self.d,) + tuple(shape), self.c)


class StaticLayeredEnvironment(Environment):
    """All edges out of column x_1 carry layers[x_1 mod len(layers)] (test oracle model)."""

    model = "static-layered"

    def __init__(self, layers=(0.5, 1.0), d=2, seed=0, period=None):
        super().__init__(d, seed, period)
        self.layers = np.asarray(layers, dtype=np.float64)
        if np.any(self.layers < 0) or np.any(self.layers > 1):
            raise ValueError("layer conductances must lie in [0, 1]")
        if period is not None and period % len(self.layers):
            raise ValueError("torus side must be a multiple of the layer period")

    def params(self):
        return {"layers": self.layers.tolist()}

    @property
    def is_static(self):
        return True

    def _rate(self, base, axis, t):
        return self.layers[base[:, 0] % len(self.layers)]

    def _pieces(self, base, axis, t0, t1):
        v = self._rate(base, axis, t0)
        return Pieces(np.arange(len(axis)), t0, t1, v, v.copy(), len(axis))


class DynamicalPercolation(Environment):
    """Each edge refreshes at rate rho; a refresh resamples its state from Bernoulli(p).

    Time is cut into epochs of length 1/rho; the number of refreshes in an epoch
    is Poisson(1) and their positions and values are hashed from (seed, edge,
    epoch, counter).  The conductance is floor + (1 - floor) * state.
    """

    model = "dyn-percolation"

    def __init__(self, p, refresh_rate=1.0, d=2, seed=0, period=None, floor=0.0):
        super().__init__(d, seed, period)
        if not 0.0 < p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if refresh_rate <= 0:
            raise ValueError("refresh_rate must be positive")
        if not 0.0 <= floor < 1.0:
            raise ValueError("floor must lie in [0, 1)")
        self.p = float(p)
        self.refresh_rate = float(refresh_rate)
        self.floor = float(floor)
        self.h = 1.0 / self.refresh_rate

    def params(self):
        return {"p": self.p, "refresh_rate": self.refresh_rate, "floor": self.floor}

    def _value(self, state):
        return self.floor + (1.0 - self.floor) * state

    def _count(self, keys, epoch):
        return rng.poisson_mean_one(rng.uniform(keys, rng.STREAM_COUNT, epoch))

    def _state(self, keys, t):
        """State (0/1) set by the last refresh at or before t."""
        n = len(keys)
        out = np.empty(n)
        if self.p >= 1.0:
            out[:] = 1.0
            return out
        cur = np.floor(t / self.h).astype(np.int64)
        lim = t.copy()
        pending = np.arange(n)
        while pending.size:
            k, ep, tl = keys[pending], cur[pending], lim[pending]
            cnt = self._count(k, ep)
            best_t = np.full(len(pending), -np.inf)
            best_c = np.zeros(len(pending), dtype=np.int64)
            for c in range(int(cnt.max(initial=0))):
                tm = (ep + rng.uniform(k, rng.STREAM_TIME, ep, c)) * self.h
                ok = (cnt > c) & (tm <= tl) & (tm > best_t)
                best_t = np.where(ok, tm, best_t)
                best_c = np.where(ok, c, best_c)
            found = best_t > -np.inf
            if found.any():
                f = pending[found]
                out[f] = rng.uniform(k[found], rng.STREAM_VALUE, ep[found], best_c[found]) < self.p
            pending = pending[~found]
            cur[pending] -= 1
            lim[pending] = np.inf
        return out

    def _rate(self, base, axis, t):
        return self._value(self._state(self.edge_keys(base, axis), t))

    def _pieces(self, base, axis, t0, t1):
        n = len(axis)
        keys = self.edge_keys(base, axis)
        v_start = self._state(keys, t0)
        if self.p >= 1.0:
            v = self._value(v_start)
            return Pieces(np.arange(n), t0, t1, v, v.copy(), n)
        j0 = np.floor(t0 / self.h).astype(np.int64)
        j1 = np.floor(t1 / self.h).astype(np.int64)
        nep = j1 - j0 + 1
        own_e = np.repeat(np.arange(n), nep)
        ep = j0[own_e] + _ragged_arange(nep)
        cnt = self._count(keys[own_e], ep)
        own_ev = np.repeat(own_e, cnt)
        ep_ev = np.repeat(ep, cnt)
        c_ev = _ragged_arange(cnt)
        k_ev = keys[own_ev]
        tm = (ep_ev + rng.uniform(k_ev, rng.STREAM_TIME, ep_ev, c_ev)) * self.h
        keep = (tm > t0[own_ev]) & (tm <= t1[own_ev])
        own_ev, tm = own_ev[keep], tm[keep]
        val = (rng.uniform(k_ev[keep], rng.STREAM_VALUE, ep_ev[keep], c_ev[keep]) < self.p).astype(np.float64)
        owner = np.concatenate([np.arange(n), own_ev])
        start = np.concatenate([t0, tm])
        value = np.concatenate([v_start, val])
        order = np.lexsort((start, owner))
        owner, start, value = owner[order], start[order], value[order]
        end = np.empty_like(start)
        end[:-1] = start[1:]
        last = np.ones(len(owner), dtype=bool)
        last[:-1] = owner[1:] != owner[:-1]
        end[last] = t1[owner[last]]
        v = self._value(value)
        return Pieces(owner, start, end, v, v.copy(), n)


def _torus_index(sites, L):
    return np.ravel_multi_index(tuple((sites % L).T), (L,) * sites.shape[1])


class Exclusion(Environment):
    """Symmetric exclusion on a torus; a_t(x, y) = c * eta_t(x) * eta_t(y).

    The trajectory is generated once on the window [t_lo, t_hi] by replaying
    swap events (rate 1 per edge); flips of each site are stored per site.
    """

    model = "exclusion"

    def __init__(self, torus_side, particle_density, c=1.0, d=2, seed=0, window=(-10.0, 500.0)):
        super().__init__(d, seed, torus_side)
        if not 0.0 < c <= 1.0:
            raise ValueError("c must lie in (0, 1] (conductances bounded by 1)")
        if not 0.0 <= particle_density <= 1.0:
            raise ValueError("particle density must lie in [0, 1]")
        self.c = float(c)
        self.density = float(particle_density)
        self.window = (float(window[0]), float(window[1]))
        self._build()

    def params(self):
        return {"particle_density": self.density, "c": self.c, "window": list(self.window)}

    def _build(self):
        L, d = self.period, self.d
        nsite = L ** d
        t_lo, t_hi = self.window
        self.eta0 = (rng.uniform(self.seed, rng.STREAM_INIT, np.arange(nsite)) < self.density).astype(np.int8)
        gen = np.random.Generator(np.random.Philox(key=rng.child_seed(self.seed, rng.STREAM_TIME)))
        n_ev = gen.poisson(d * nsite * (t_hi - t_lo))
        times = np.sort(gen.uniform(t_lo, t_hi, n_ev))
        eidx = gen.integers(0, d * nsite, n_ev)
        site = eidx // d
        ax = eidx % d
        coords = np.stack(np.unravel_index(site, (L,) * d), axis=1)
        coords[np.arange(n_ev), ax] += 1
        other = _torus_index(coords, L)
        fs, ft = _replay(self.eta0.copy(), site.astype(np.int64), other.astype(np.int64), times)
        order = np.argsort(fs, kind="stable")
        fs, ft = fs[order], ft[order]
        self._offsets = np.concatenate([[0], np.cumsum(np.bincount(fs, minlength=nsite))])
        self._span = t_hi - t_lo + 1.0
        self._flip_time = ft
        self._flip_key = fs * self._span + (ft - t_lo)
        self.n_swaps = int(len(fs) // 2)

    def _check_window(self, t):
        if np.any(t < self.window[0]) or np.any(t > self.window[1]):
            raise ValueError(f"exclusion trajectory only generated on {self.window}")

    def _eta(self, sidx, t):
        self._check_window(t)
        q = sidx * self._span + (t - self.window[0])
        nflip = np.searchsorted(self._flip_key, q, side="right") - self._offsets[sidx]
        return (self.eta0[sidx] ^ (nflip & 1)).astype(np.float64)

    def occupation(self, t):
        sidx = np.arange(self.period ** self.d)
        return self._eta(sidx, np.full(len(sidx), float(t)))

    def _rate(self, base, axis, t):
        L = self.period
        tip = base.copy()
        tip[np.arange(len(tip)), axis] += 1
        s1, s2 = _torus_index(base, L), _torus_index(tip, L)
        return self.c * self._eta(s1, t) * self._eta(s2, t)

    def _pieces(self, base, axis, t0, t1):
        self._check_window(t0)
        self._check_window(t1)
        n = len(axis)
        L = self.period
        tip = base.copy()
        tip[np.arange(n), axis] += 1
        owners, times = [np.arange(n)], [t0]
        for s in (_torus_index(base, L), _torus_index(tip, L)):
            lo = np.searchsorted(self._flip_key, s * self._span + (t0 - self.window[0]), side="right")
            hi = np.searchsorted(self._flip_key, s * self._span + (t1 - self.window[0]), side="right")
            cnt = hi - lo
            idx = np.repeat(lo, cnt) + _ragged_arange(cnt)
            owners.append(np.repeat(np.arange(n), cnt))
            times.append(self._flip_time[idx])
        owner = np.concatenate(owners)
        start = np.concatenate(times)
        order = np.lexsort((start, owner))
        owner, start = owner[order], start[order]
        end = np.empty_like(start)
        end[:-1] = start[1:]
        last = np.ones(len(owner), dtype=bool)
        last[:-1] = owner[1:] != owner[:-1]
        end[last] = t1[owner[last]]
        v = self._rate(base[owner], axis[owner], start)
        return Pieces(owner, start, end, v, v.copy(), n)


def _replay_py(eta, a, b, times):
    fs = np.empty(2 * len(a), dtype=np.int64)
    ft = np.empty(2 * len(a))
    m = 0
    for k in range(len(a)):
        i, j = a[k], b[k]
        if eta[i] != eta[j]:
            eta[i], eta[j] = eta[j], eta[i]
            fs[m], ft[m] = i, times[k]
            fs[m + 1], ft[m + 1] = j, times[k]
            m += 2
    return fs[:m], ft[:m]


try:
    from numba import njit

    _replay = njit(cache=True)(_replay_py)
except ImportError:  # pragma: no cover
    _replay = _replay_py


class Langevin(Environment):
    """Gradient Langevin field on a torus, a_t(x, y) = V''(phi_t(y) - phi_t(x)).

    phi is integrated by Euler-Maruyama with step dt,
    d phi(x) = sum_y V'(phi(y) - phi(x)) dt + noise * sqrt(2) dB(x),
    with phi(0) pinned to zero.  Gradients are stored every ``store_every`` steps
    and interpolated linearly in time; for the quadratic-linear potential the rate
    is the indicator of |interpolated gradient| <= 1.
    """

    model = "langevin"

    def __init__(self, torus_side, potential="logcosh", dt=1e-3, d=2, seed=0, beta=1.0,
                 window=(0.0, 100.0), noise=1.0, burn_in=2.0, store_every=10, noise_dt=None):
        super().__init__(d, seed, torus_side)
        if potential not in ("logcosh", "quadratic-linear"):
            raise ValueError(f"unknown potential {potential!r}")
        if potential == "logcosh" and not 0.0 < beta <= 1.0:
            raise ValueError("logcosh potential requires 0 < beta <= 1 (rates bounded by 1)")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.potential = potential
        self.beta = float(beta)
        self.dt = float(dt)
        self.noise = float(noise)
        self.window = (float(window[0]), float(window[1]))
        self.burn_in = float(burn_in)
        self.store_every = int(store_every)
        self.noise_dt = float(noise_dt) if noise_dt is not None else self.dt
        ratio = self.dt / self.noise_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt must be an integer multiple of noise_dt")
        self._sub = int(round(ratio))
        self._simulate()

    def params(self):
        return {"potential": self.potential, "beta": self.beta, "dt": self.dt, "noise": self.noise,
                "window": list(self.window), "burn_in": self.burn_in, "store_every": self.store_every,
                "noise_dt": self.noise_dt}

    @property
    def piecewise_constant(self):
        return self.potential == "quadratic-linear"

    def vprime(self, g):
        if self.potential == "logcosh":
            return self.beta * np.tanh(g)
        return np.clip(g, -1.0, 1.0)

    def vsecond(self, g):
        if self.potential == "logcosh":
            return self.beta / np.cosh(g) ** 2
        return (np.abs(g) <= 1.0).astype(np.float64)

    def _grads(self, phi):
        return np.stack([np.roll(phi, -1, axis=i) - phi for i in range(self.d)])

    def _simulate(self):
        L, d = self.period, self.d
        shape = (L,) * d
        nsite = L ** d
        t_lo, t_hi = self.window
        n_burn = int(round(self.burn_in / self.dt))
        n_run = int(math.ceil((t_hi - t_lo) / (self.dt * self.store_every))) * self.store_every
        self.frame_dt = self.dt * self.store_every
        frames = np.empty((n_run // self.store_every + 1, d) + shape)
        phi = np.zeros(shape)
        sites = np.arange(nsite)
        amp = self.noise * math.sqrt(2.0 * self.noise_dt)
        block = max(1, 2 ** 20 // (nsite * self._sub))
        for step in range(n_burn + n_run + 1):
            k = step - n_burn
            if k >= 0 and k % self.store_every == 0:
                frames[k // self.store_every] = self._grads(phi)
            if k == n_run:
                break
            g = self._grads(phi)
            drift = np.zeros(shape)
            for i in range(d):
                f = self.vprime(g[i])
                drift += f - np.roll(f, 1, axis=i)
            if step % block == 0:
                idx = (step + np.arange(block))[:, None] * self._sub + np.arange(self._sub)[None, :]
                noise = rng.normal(self.seed, rng.STREAM_NOISE, idx[:, :, None], sites).sum(axis=1)
            dw = noise[step % block]
            phi = phi + self.dt * drift + amp * dw.reshape(shape)
            phi -= phi.flat[0]
            if not np.all(np.isfinite(phi)) or np.abs(phi).max() > 1e8:
                raise RuntimeError("Langevin field blew up; reduce dt")
        self.frames = frames
        self.frame_times = t_lo + self.frame_dt * np.arange(len(frames))

    def _check_window(self, t):
        if np.any(t < self.window[0] - 1e-12) or np.any(t > self.frame_times[-1] + 1e-12):
            raise ValueError(f"Langevin trajectory only generated on {self.window}")

    def _frame_pos(self, t):
        x = (t - self.window[0]) / self.frame_dt
        i0 = np.clip(np.floor(x).astype(np.int64), 0, len(self.frames) - 2)
        return i0, np.clip(x - i0, 0.0, 1.0)

    def _grad_at(self, frame, base, axis):
        idx = (frame, axis) + tuple(base.T)
        return self.frames[idx]

    def _rate(self, base, axis, t):
        self._check_window(t)
        i0, w = self._frame_pos(t)
        g0 = self._grad_at(i0, base, axis)
        g1 = self._grad_at(i0 + 1, base, axis)
        if self.potential == "logcosh":
            return (1 - w) * self.vsecond(g0) + w * self.vsecond(g1)
        return self.vsecond((1 - w) * g0 + w * g1)

    def rate_field(self, t, origin=None, shape=None):
        if origin is not None or shape is not None:
            return super().rate_field(t, origin, shape)
        t = np.asarray([float(t)])
        self._check_window(t)
        i0, w = self._frame_pos(t)
        i0, w = int(i0[0]), float(w[0])
        if self.potential == "logcosh":
            return (1 - w) * self.vsecond(self.frames[i0]) + w * self.vsecond(self.frames[i0 + 1])
        return self.vsecond((1 - w) * self.frames[i0] + w * self.frames[i0 + 1])

    def _pieces(self, base, axis, t0, t1):
        self._check_window(t0)
        self._check_window(t1)
        n = len(axis)
        f0, _ = self._frame_pos(t0)
        f1, _ = self._frame_pos(t1)
        cnt = f1 - f0 + 1
        own = np.repeat(np.arange(n), cnt)
        fr = f0[own] + _ragged_arange(cnt)
        a = np.maximum(self.frame_times[fr], t0[own])
        b = np.minimum(self.frame_times[fr + 1], t1[own])
        keep = b >= a
        own, fr, a, b = own[keep], fr[keep], a[keep], b[keep]
        if self.potential == "logcosh":
            va = self._rate(base[own], axis[own], a)
            vb = self._rate(base[own], axis[own], b)
            return Pieces(own, a, b, va, vb, n)
        # split each interval where the interpolated gradient crosses +-1
        g0 = self._grad_at(fr, base[own], axis[own])
        g1 = self._grad_at(fr + 1, base[own], axis[own])
        ta, tb = self.frame_times[fr], self.frame_times[fr + 1]
        dg = g1 - g0
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = (-1.0 - g0) / dg
            l2 = (1.0 - g0) / dg
        flat = dg == 0
        lo = np.where(flat, np.where(np.abs(g0) <= 1, 0.0, 1.0), np.minimum(l1, l2))
        hi = np.where(flat, np.where(np.abs(g0) <= 1, 1.0, 1.0), np.maximum(l1, l2))
        lo, hi = np.clip(lo, 0, 1), np.clip(hi, 0, 1)
        c1 = ta + lo * (tb - ta)
        c2 = ta + hi * (tb - ta)
        starts = np.stack([a, np.clip(c1, a, b), np.clip(c2, a, b)], axis=1)
        ends = np.stack([np.clip(c1, a, b), np.clip(c2, a, b), b], axis=1)
        vals = np.stack([np.zeros_like(a), np.ones_like(a), np.zeros_like(a)], axis=1)
        # flat intervals with |g| > 1 are entirely closed
        vals[flat & (np.abs(g0) > 1), 1] = 0.0
        ownr = np.repeat(own, 3)
        v = vals.ravel()
        return Pieces(ownr, starts.ravel(), ends.ravel(), v, v.copy(), n)


# ---------------------------------------------------------------------------
# constructors


def _period(domain):
    if domain is None or domain == "infinite":
        return None
    if isinstance(domain, dict):
        return domain.get("L") if domain.get("mode", "torus") == "torus" else None
    return int(domain)


def make_constant(c=1.0, d=2, domain=None, seed=0):
    return ConstantEnvironment(c, d=d, seed=seed, period=_period(domain))


def make_static_layered(layers=(0.5, 1.0), d=2, domain=None, seed=0):
    return StaticLayeredEnvironment(layers, d=d, seed=seed, period=_period(domain))


def make_dynamical_percolation(p, refresh_rate=1.0, seed=0, domain=None, d=2, floor=0.0):
    return DynamicalPercolation(p, refresh_rate, d=d, seed=seed, period=_period(domain), floor=floor)


def make_exclusion(torus_side, particle_density, c=1.0, seed=0, d=2, window=(-10.0, 500.0)):
    return Exclusion(torus_side, particle_density, c, d=d, seed=seed, window=window)


def make_langevin(torus_side, potential="logcosh", dt=1e-3, seed=0, d=2, beta=1.0, **kw):
    return Langevin(torus_side, potential, dt, d=d, seed=seed, beta=beta, **kw)


def make_environment(spec: dict) -> Environment:
    """Build an environment from a config block {model, params, seed, d, domain}."""
    model = spec.get("model")
    params = dict(spec.get("params", {}))
    seed = int(spec.get("seed", 0))
    d = int(spec.get("d", 2))
    domain = spec.get("domain")
    if model not in MODELS:
        raise ValueError(f"unknown environment model {model!r}; expected one of {MODELS}")
    if model == "constant":
        return make_constant(params.get("c", 1.0), d=d, domain=domain, seed=seed)
    if model == "static-layered":
        return make_static_layered(params.get("layers", (0.5, 1.0)), d=d, domain=domain, seed=seed)
    if model == "dyn-percolation":
        return make_dynamical_percolation(params["p"], params.get("refresh_rate", 1.0), seed=seed,
                                          domain=domain, d=d, floor=params.get("floor", 0.0))
    L = _period(domain)
    if L is None:
        raise ValueError(f"model {model!r} requires a torus domain")
    if model == "exclusion":
        return make_exclusion(L, params["particle_density"], params.get("c", 1.0), seed=seed, d=d,
                              window=tuple(params.get("window", (-10.0, 500.0))))
    if model == "langevin":
        kw = {k: params[k] for k in ("window", "noise", "burn_in", "store_every", "noise_dt") if k in params}
        if "window" in kw:
            kw["window"] = tuple(kw["window"])
        return make_langevin(L, params.get("potential", "logcosh"), params.get("dt", 1e-3), seed=seed, d=d,
                             beta=params.get("beta", 1.0), **kw)
    raise ValueError(f"unknown environment model {model!r}; expected one of {MODELS}")


# ---------------------------------------------------------------------------
# edge-level operations


def _edge_arrays(e):
    if isinstance(e, Edge):
        return np.array([e.x]), np.array([e.axis])
    base, axis = e
    return _edges_args(base, axis)


def rate(env: Environment, e, t):
    base, axis = _edge_arrays(e)
    out = env.rate(base, axis, t)
    return float(out[0]) if isinstance(e, Edge) else out


def cumulative_rates(env, base, axis, t0, t1):
    return env.pieces(base, axis, t0, t1).integral()


def cumulative_rate(env: Environment, e, t0, t1):
    base, axis = _edge_arrays(e)
    out = cumulative_rates(env, base, axis, t0, t1)
    return float(out[0]) if isinstance(e, Edge) else out


def _solve_in_piece(start, end, v0, v1, need):
    """Time s in [start, end] where the integral of the linear rate reaches need."""
    h = end - start
    slope = np.divide(v1 - v0, h, out=np.zeros_like(h), where=h > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = need / v0
        disc = np.sqrt(np.maximum(v0 ** 2 + 2 * slope * need, 0.0))
        quad = 2 * need / (v0 + disc)
    x = np.where(np.abs(slope) * h < 1e-14 * np.maximum(v0, 1e-300), lin, quad)
    return np.minimum(start + np.nan_to_num(x, nan=h, posinf=h), end)


def first_unit_times(env, base, axis, t0=0.0, horizon=1e6, chunk=16.0):
    """T_e(t0) = inf{t >= 0: integral_{t0}^{t0+t} a >= 1}, vectorized; returns t (not t0 + t)."""
    base, axis = _edges_args(base, axis)
    n = len(axis)
    t0 = _times(t0, n)
    out = np.full(n, np.nan)
    remaining = np.ones(n)
    start = t0.copy()
    pending = np.arange(n)
    step = float(chunk)
    while pending.size:
        stop = start[pending] + step
        P = env.pieces(base[pending], axis[pending], start[pending], stop)
        area = P.areas()
        csum = np.cumsum(area)
        first_idx = np.searchsorted(P.owner, np.arange(len(pending)), side="left")
        before = np.concatenate([[0.0], csum])[first_idx]
        within = csum - before[P.owner]
        hit = within >= remaining[pending][P.owner]
        # first hitting piece for each owner
        hit_owner = P.owner[hit]
        first_hit = np.full(len(pending), -1)
        hit_pos = np.nonzero(hit)[0]
        uniq, pos = np.unique(hit_owner, return_index=True)
        first_hit[uniq] = hit_pos[pos]
        done = first_hit >= 0
        if done.any():
            j = first_hit[done]
            prev = within[j] - area[j]
            need = remaining[pending][done] - prev
            s = _solve_in_piece(P.start[j], P.end[j], P.v0[j], P.v1[j], need)
            out[pending[done]] = s - t0[pending[done]]
        total = np.bincount(P.owner, weights=area, minlength=len(pending))
        nd = ~done
        remaining[pending[nd]] -= total[nd]
        start[pending[nd]] = stop[nd]
        pending = pending[nd]
        if pending.size and np.any(start[pending] - t0[pending] > horizon):
            raise RuntimeError(f"unit time search exceeded horizon {horizon}")
        step = min(step * 2, 1024.0)
    return out


def first_unit_time(env: Environment, e, t0=0.0, horizon=1e6):
    base, axis = _edge_arrays(e)
    out = first_unit_times(env, base, axis, t0, horizon)
    return float(out[0]) if isinstance(e, Edge) else out


WEIGHT_CHUNK = 1024


@dataclass(frozen=True)
class KernelWeightSpec:
    """Truncation of w_t(e) = int_t^inf k_{s-t} a_s ds at horizon H, k_t = (1+t)^-mu."""

    mu: float
    horizon: float
    tolerance: float

    def __post_init__(self):
        if self.mu <= 1:
            raise ValueError("mu > 1 required for an integrable kernel")
        if self.tail() > self.tolerance * (1 + 1e-12):
            raise ValueError(f"horizon {self.horizon} leaves tail {self.tail():.3g} > tolerance {self.tolerance:.3g}")

    def tail(self):
        return (1.0 + self.horizon) ** (1 - self.mu) / (self.mu - 1)

    @classmethod
    def for_tolerance(cls, mu, tolerance=1e-10):
        H = ((mu - 1) * tolerance) ** (-1.0 / (mu - 1)) - 1.0
        return cls(float(mu), float(max(H, 0.0)), float(tolerance))


def weights(env, base, axis, t, spec: KernelWeightSpec):
    base, axis = _edges_args(base, axis)
    t = _times(t, len(axis))
    # chunked so long piecewise trajectories do not exhaust memory
    out = np.empty(len(axis))
    for i in range(0, len(axis), WEIGHT_CHUNK):
        sl = slice(i, i + WEIGHT_CHUNK)
        P = env.pieces(base[sl], axis[sl], t[sl], t[sl] + spec.horizon)
        out[sl] = P.kernel_integral(t[sl], spec.mu)
    return out


def weight(env: Environment, e, t, spec: KernelWeightSpec):
    base, axis = _edge_arrays(e)
    out = weights(env, base, axis, t, spec)
    return float(out[0]) if isinstance(e, Edge) else out


def sample_edges(env: Environment, n, seed=0, spread=10 ** 6):
    """n pseudo-random edges (base, axis); spread out on the infinite lattice or on the torus."""
    idx = np.arange(n)
    span = env.period if env.period is not None else spread
    base = np.stack([(rng.hash_keys(seed, rng.STREAM_SAMPLE, idx, i) % np.uint64(span)).astype(np.int64)
                     for i in range(env.d)], axis=1)
    if env.period is None:
        base -= span // 2
    axis = (rng.hash_keys(seed, rng.STREAM_SAMPLE, idx, 99) % np.uint64(env.d)).astype(np.int64)
    return base, axis


def check_weight_lower_bound(env: Environment, n_edges=10 ** 4, seed=0, mu=5.0, tolerance=1e-8, t=0.0):
    """w_t(e) >= k(T_e(t)) on sampled edges, up to the truncation tolerance of the weights."""
    base, axis = sample_edges(env, n_edges, seed)
    spec = KernelWeightSpec.for_tolerance(mu, tolerance)
    w = weights(env, base, axis, t, spec)
    T = first_unit_times(env, base, axis, t)
    kT = (1.0 + T) ** (-mu)
    ok = w + tolerance >= kT
    return {"check": "weight_lower_bound", "model": env.model, "n_edges": int(n_edges), "mu": mu,
            "tolerance": tolerance, "violations": int((~ok).sum()), "min_margin": float((w - kT).min()),
            "holds": bool(ok.all()), "_samples": {"w": w, "T": T, "kT": kT}}


def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def moment_estimates(env: Environment, q, theta, n_samples=10 ** 4, seed=0, mu=5.0, tolerance=1e-10, t=0.0):
    """MC estimates of E a^-q, E w^-q and E T_e^theta at time t with standard errors."""
    base, axis = sample_edges(env, n_samples, seed)
    a0 = env.rate(base, axis, t)
    spec = KernelWeightSpec.for_tolerance(mu, tolerance)
    w0 = weights(env, base, axis, t, spec)
    te = first_unit_times(env, base, axis, t)
    out = {"n_samples": int(n_samples), "q": q, "theta": theta, "mu": mu}
    if np.any(a0 <= 0):
        out["a_inv_q"] = {"mean": float("inf"), "se": float("nan"), "diverging": True,
                          "zero_fraction": float(np.mean(a0 <= 0))}
    else:
        m, s = _mean_se(a0 ** (-q))
        out["a_inv_q"] = {"mean": m, "se": s, "diverging": False}
    m, s = _mean_se(w0 ** (-q))
    out["w_inv_q"] = {"mean": m, "se": s, "diverging": bool(np.any(w0 <= 0))}
    m, s = _mean_se(te ** theta)
    out["T_theta"] = {"mean": m, "se": s, "diverging": False}
    out["_samples"] = {"a0": a0, "w0": w0, "T": te}
    return out


class ScheduledEnvironment(Environment):
    """Deterministic piecewise-constant trajectory shared by every edge (oracle model).

    values[i] holds on [times[i], times[i+1]); values[0] before times[0] is not
    defined, so queries must lie at or after times[0].
    """

    model = "scheduled"

    def __init__(self, times, values, d=2, seed=0, period=None):
        super().__init__(d, seed, period)
        self.times = np.asarray(times, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if len(self.times) != len(self.values) or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing and match values")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("values must lie in [0, 1]")

    def params(self):
        return {"times": self.times.tolist(), "values": self.values.tolist()}

    def _rate(self, base, axis, t):
        i = np.searchsorted(self.times, t, side="right") - 1
        if np.any(i < 0):
            raise ValueError("query before the first breakpoint")
        return self.values[i]

    def _pieces(self, base, axis, t0, t1):
        n = len(axis)
        i0 = np.searchsorted(self.times, t0, side="right") - 1
        i1 = np.searchsorted(self.times, t1, side="right") - 1
        if np.any(i0 < 0):
            raise ValueError("query before the first breakpoint")
        cnt = i1 - i0 + 1
        own = np.repeat(np.arange(n), cnt)
        idx = i0[own] + _ragged_arange(cnt)
        start = np.maximum(self.times[idx], t0[own])
        nxt = np.append(self.times, np.inf)[idx + 1]
        end = np.minimum(nxt, t1[own])
        v = self.values[idx]
        return Pieces(own, start, end, v, v.copy(), n)


def cumulative_at(P: Pieces, t_start, times):
    """int_{t_start[i]}^{times[j]} a for every owner i and grid time j (times within the pieces' span)."""
    times = np.asarray(times, dtype=np.float64)
    t_start = np.asarray(t_start, dtype=np.float64)
    lo = float(P.start.min()) if len(P.start) else 0.0
    span = float(max(P.end.max(), times.max()) - lo) + 1.0
    key = P.owner * span + (P.start - lo)
    area = P.areas()
    csum = np.concatenate([[0.0], np.cumsum(area)])
    first = np.searchsorted(P.owner, np.arange(P.n), side="left")
    owner = np.repeat(np.arange(P.n), len(times))
    tq = np.tile(times, P.n)
    idx = np.searchsorted(key, owner * span + (tq - lo), side="right") - 1
    idx = np.maximum(idx, first[owner])
    s0, s1 = P.start[idx], P.end[idx]
    h = s1 - s0
    x = np.clip(tq - s0, 0.0, h)
    frac = np.divide(x, h, out=np.zeros_like(x), where=h > 0)
    v_at = P.v0[idx] + frac * (P.v1[idx] - P.v0[idx])
    partial = x * 0.5 * (P.v0[idx] + v_at)
    before = csum[idx] - csum[first[owner]]
    out = (before + partial).reshape(P.n, len(times))
    return out


def cell_averages(env: Environment, base, axis, t0, dt, n_cells):
    """Exact averages of a over the cells [t0 + m dt, t0 + (m+1) dt], shape (n_edges, n_cells)."""
    base, axis = _edges_args(base, axis)
    t1 = t0 + dt * n_cells
    P = env.pieces(base, axis, t0, t1)
    grid = t0 + dt * np.arange(n_cells + 1)
    A = cumulative_at(P, np.full(len(axis), t0), grid)
    return np.clip(np.diff(A, axis=1) / dt, 0.0, 1.0)


def rate_cells(env: Environment, t0, dt, n_cells, shape=None, origin=None):
    """Cell-averaged rates of all edges (x, x + e_i) of a box: array (n_cells, d, *shape)."""
    if shape is None:
        if env.period is None:
            raise ValueError("shape required for infinite environments")
        shape = (env.period,) * env.d
    shape = tuple(shape)
    if env.is_static:
        field = env.rate_field(t0, origin, shape)
        return np.broadcast_to(field, (n_cells,) + field.shape)
    origin = np.zeros(env.d, dtype=np.int64) if origin is None else np.asarray(origin, dtype=np.int64)
    grids = np.meshgrid(*[np.arange(o, o + s) for o, s in zip(origin, shape)], indexing="ij")
    sites = np.stack([g.ravel() for g in grids], axis=1)
    out = np.empty((n_cells, env.d) + shape)
    for i in range(env.d):
        avg = cell_averages(env, sites, i, t0, dt, n_cells)
        out[:, i] = avg.T.reshape((n_cells,) + shape)
    return out


class CellEnvironment(Environment):
    """Torus environment constant on time cells [t0 + m dt, t0 + (m+1) dt): rates[m, i, x] on edge (x, x + e_i).

    Built from rate_cells, it is the environment the grid solvers see exactly.
    """

    model = "cells"

    def __init__(self, rates, t0, dt, seed=0):
        rates = np.asarray(rates, dtype=np.float64)
        d = rates.ndim - 2
        super().__init__(d, seed, rates.shape[-1])
        if rates.shape[1] != d or len(set(rates.shape[2:])) != 1:
            raise ValueError("rates must have shape (n_cells, d, L, ..., L)")
        self.rates = rates
        self.t0, self.dt = float(t0), float(dt)
        self.n_cells = rates.shape[0]

    def params(self):
        return {"t0": self.t0, "dt": self.dt, "n_cells": self.n_cells}

    @classmethod
    def from_env(cls, env: Environment, t0, dt, n_cells):
        return cls(rate_cells(env, t0, dt, n_cells), t0, dt, env.seed)

    def _cell(self, t):
        m = np.floor((np.asarray(t) - self.t0) / self.dt).astype(np.int64)
        if np.any(m < 0) or np.any(m >= self.n_cells):
            raise ValueError("query outside the stored time cells")
        return m

    def _lookup(self, m, base, axis):
        return self.rates[(m, axis) + tuple(base.T)]

    def _rate(self, base, axis, t):
        return self._lookup(self._cell(t), base, axis)

    def _pieces(self, base, axis, t0, t1):
        n = len(axis)
        m0 = self._cell(t0)
        m1 = np.minimum(np.floor((t1 - self.t0) / self.dt).astype(np.int64), self.n_cells - 1)
        if np.any(t1 > self.t0 + self.dt * self.n_cells):
            raise ValueError("query outside the stored time cells")
        cnt = np.maximum(m1 - m0 + 1, 1)
        own = np.repeat(np.arange(n), cnt)
        m = m0[own] + _ragged_arange(cnt)
        start = np.maximum(self.t0 + m * self.dt, t0[own])
        end = np.minimum(self.t0 + (m + 1) * self.dt, t1[own])
        v = self._lookup(m, base[own], axis[own])
        return Pieces(own, start, np.maximum(end, start), v, v.copy(), n)
