"""Variable-speed random walk by thinning.

Proposals come from a rate-2d exponential clock; at a proposal time t a uniform
direction among the 2d incident edges is picked and the jump across edge e is
accepted with probability a_t(e).  Random numbers are keyed by
(walk seed, path id, proposal index), so paths are independent of batching and
of the number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import env as envmod
from . import rng

CHUNK_PATHS = 8192


@dataclass
class WalkPath:
    start: np.ndarray
    t0: float
    jump_times: np.ndarray
    sites: np.ndarray          # destination after each jump, shape (n_jumps, d)
    seed: int
    path_id: int = 0

    def position(self, t):
        """X_t for an array of times (cadlag)."""
        j = np.searchsorted(self.jump_times, np.asarray(t, dtype=np.float64), side="right")
        all_sites = np.vstack([self.start[None], self.sites])
        return all_sites[j]

    def to_csv_rows(self):
        rows = [(self.t0, *self.start.tolist())]
        rows += [(float(t), *x.tolist()) for t, x in zip(self.jump_times, self.sites)]
        return rows


@dataclass
class Ensemble:
    checkpoints: np.ndarray            # (n_cp,)
    positions: np.ndarray              # (n_paths, n_cp, d) X at checkpoints (relative to start)
    starts: np.ndarray                 # (n_paths, d)
    env_seeds: np.ndarray              # (n_paths,)
    path_ids: np.ndarray
    walk_seed: int
    mode: str = "quenched"
    paths: list | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return len(self.positions)

    def displacement(self, k=-1):
        return self.positions[:, k] - self.starts


def _directions(d):
    axis = np.tile(np.arange(d), 2)
    sign = np.repeat([1, -1], d)
    return axis, sign


def _run(env, x0, t0, t_max, seed, ids, checkpoints=(), record=False, stop_first=False):
    """Thinning for a batch of independent paths sharing env."""
    d = env.d
    n = len(ids)
    pos = np.array(np.broadcast_to(np.asarray(x0, dtype=np.int64), (n, d)))
    start = pos.copy()
    t = np.full(n, float(t0))
    k = np.zeros(n, dtype=np.int64)
    cps = np.asarray(checkpoints, dtype=np.float64)
    out_cp = np.zeros((n, len(cps), d), dtype=np.int64)
    next_cp = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    rec = [] if record else None
    first = np.full(n, np.inf), np.full(n, -1, dtype=np.int64)
    dir_axis, dir_sign = _directions(d)
    ids = np.asarray(ids, dtype=np.int64)
    while active.any():
        idx = np.flatnonzero(active)
        kk = k[idx]
        pid = ids[idx]
        tn = t[idx] + rng.exponential(seed, rng.STREAM_WALK, pid, kk, 0) / (2 * d)
        # checkpoints passed before the proposal keep the current position
        while len(cps):
            nc = next_cp[idx]
            has = nc < len(cps)
            hit = np.zeros(len(idx), dtype=bool)
            hit[has] = cps[nc[has]] < tn[has]
            if not hit.any():
                break
            h = idx[hit]
            out_cp[h, next_cp[h]] = pos[h]
            next_cp[h] += 1
        done = tn > t_max
        active[idx[done]] = False
        go = ~done
        idx, tn, kk, pid = idx[go], tn[go], kk[go], pid[go]
        if len(idx) == 0:
            break
        j = np.minimum((rng.uniform(seed, rng.STREAM_WALK, pid, kk, 1) * (2 * d)).astype(np.int64), 2 * d - 1)
        ax, sg = dir_axis[j], dir_sign[j]
        base = pos[idx].copy()
        neg = sg < 0
        base[neg, ax[neg]] -= 1
        acc = rng.uniform(seed, rng.STREAM_WALK, pid, kk, 2) < env.rate(base, ax, tn)
        a_idx = idx[acc]
        pos[a_idx, ax[acc]] += sg[acc]
        t[idx] = tn
        k[idx] += 1
        if record and len(a_idx):
            rec.append((a_idx, tn[acc], pos[a_idx].copy()))
        if stop_first and len(a_idx):
            first[0][a_idx] = tn[acc]
            first[1][a_idx] = j[acc]
            active[a_idx] = False
    if stop_first:
        return first
    paths = None
    if record:
        if rec:
            who = np.concatenate([r[0] for r in rec])
            when = np.concatenate([r[1] for r in rec])
            where = np.concatenate([r[2] for r in rec])
            order = np.lexsort((when, who))
            who, when, where = who[order], when[order], where[order]
            cuts = np.searchsorted(who, np.arange(n + 1))
        else:
            cuts = np.zeros(n + 1, dtype=np.int64)
            when, where = np.zeros(0), np.zeros((0, d), dtype=np.int64)
        paths = [WalkPath(start[i], float(t0), when[cuts[i]:cuts[i + 1]], where[cuts[i]:cuts[i + 1]], seed, int(ids[i]))
                 for i in range(n)]
    return out_cp, start, paths


def simulate(env, x0, t0, t_max, seed, path_id=0) -> WalkPath:
    _, _, paths = _run(env, np.asarray(x0)[None], t0, t_max, seed, [path_id], record=True)
    return paths[0]


def simulate_paths(env, n_paths, t_max, seed, checkpoints, x0=None, t0=0.0, threads=1, record=False,
                   path_offset=0):
    """Quenched ensemble in one environment: positions at checkpoints for paths path_offset..+n_paths."""
    d = env.d
    x0 = np.zeros(d, dtype=np.int64) if x0 is None else np.asarray(x0, dtype=np.int64)
    ids = np.arange(path_offset, path_offset + n_paths)
    chunks = [ids[i:i + CHUNK_PATHS] for i in range(0, n_paths, CHUNK_PATHS)]
    work = lambda c: _run(env, x0, t0, t_max, seed, c, checkpoints, record)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(work, chunks))
    else:
        res = [work(c) for c in chunks]
    cp = np.concatenate([r[0] for r in res]) if res else np.zeros((0, len(checkpoints), d), dtype=np.int64)
    starts = np.concatenate([r[1] for r in res]) if res else np.zeros((0, d), dtype=np.int64)
    paths = [p for r in res for p in r[2]] if record else None
    return cp, starts, paths


def batch_simulate(env_spec: dict, env_seeds, n_walk, t_max, walk_seed, checkpoints=None, threads=1,
                   record=False, t0=0.0) -> Ensemble:
    """n_walk paths in each environment seed (quenched: one seed, annealed: many)."""
    checkpoints = np.asarray([t_max] if checkpoints is None else checkpoints, dtype=np.float64)
    env_seeds = [int(s) for s in env_seeds]
    pos, starts, seeds, ids, paths = [], [], [], [], []
    for es in env_seeds:
        env = envmod.make_environment({**env_spec, "seed": es})
        ws = rng.child_seed(walk_seed, es)
        cp, st, pp = simulate_paths(env, n_walk, t_max, ws, checkpoints, t0=t0, threads=threads, record=record)
        pos.append(cp)
        starts.append(st)
        seeds.append(np.full(n_walk, es))
        ids.append(np.arange(n_walk))
        if record:
            paths += pp
    return Ensemble(checkpoints, np.concatenate(pos), np.concatenate(starts), np.concatenate(seeds),
                    np.concatenate(ids), int(walk_seed), "quenched" if len(env_seeds) == 1 else "annealed",
                    paths if record else None, {"env_spec": env_spec, "t_max": float(t_max), "n_walk": n_walk})


# ---------------------------------------------------------------------------
# first-jump oracle for piecewise-constant environments


def first_jump_thinning(env, x0, t0, n, seed):
    """First jump time (after t0) and direction index for n independent walks from x0."""
    times, dirs = _run(env, np.asarray(x0)[None], t0, np.inf, seed, np.arange(n), stop_first=True)
    return times - t0, dirs


def first_jump_exact(env, x0, t0, n, seed, horizon=1e4):
    """Event-driven oracle: invert the cumulative hazard of the 2d incident edges exactly.

    Requires piecewise-constant rates, so the hazard is piecewise linear in time.
    """
    if not env.piecewise_constant:
        raise ValueError("event-driven oracle needs piecewise-constant rates")
    d = env.d
    dir_axis, dir_sign = _directions(d)
    x0 = np.asarray(x0, dtype=np.int64)
    base = np.repeat(x0[None], 2 * d, axis=0)
    base[dir_sign < 0, dir_axis[dir_sign < 0]] -= 1
    P = env.pieces(base, dir_axis, t0, t0 + horizon)
    grid = np.unique(np.concatenate([P.start, P.end, [t0, t0 + horizon]]))
    H_edge = envmod.cumulative_at(P, np.full(2 * d, float(t0)), grid)      # (2d, n_grid)
    H = H_edge.sum(axis=0)
    E = rng.exponential(seed, rng.STREAM_SAMPLE, np.arange(n))
    if np.any(E > H[-1]):
        raise RuntimeError("oracle horizon too short")
    j = np.searchsorted(H, E, side="left")
    j = np.maximum(j, 1)
    rate = (H[j] - H[j - 1]) / (grid[j] - grid[j - 1])
    tau = grid[j - 1] + (E - H[j - 1]) / rate
    # direction chosen in proportion to the incident rates on the hitting interval
    share = (H_edge[:, j] - H_edge[:, j - 1]) / (H[j] - H[j - 1])
    u = rng.uniform(seed, rng.STREAM_SAMPLE, np.arange(n), 1)
    dirs = (np.cumsum(share, axis=0) < u[None]).sum(axis=0)
    return tau - t0, np.minimum(dirs, 2 * d - 1)


def compare_first_jump(env, x0, t0, n, seed, alpha=0.01):
    from scipy import stats

    ta, da = first_jump_thinning(env, x0, t0, n, seed)
    tb, db = first_jump_exact(env, x0, t0, n, rng.child_seed(seed, 1))
    ks = stats.ks_2samp(ta, tb)
    k = 2 * env.d
    table = np.array([np.bincount(da, minlength=k), np.bincount(db, minlength=k)])
    table = table[:, table.sum(axis=0) > 0]
    chi_p = float(stats.chi2_contingency(table)[1]) if table.shape[1] > 1 else 1.0
    return {"check": "first_jump_oracle", "ks_p": float(ks.pvalue), "direction_p": chi_p,
            "mean_thinning": float(ta.mean()), "mean_exact": float(tb.mean()),
            "holds": bool(ks.pvalue > alpha and chi_p > alpha)}


# ---------------------------------------------------------------------------
# environment seen from the walker


def edge_rate_average(env, path: WalkPath, horizon, axis=0):
    """(1/horizon) int_0^horizon a_s(X_s, X_s + e_axis) ds along the path, exact for piecewise rates."""
    t0 = path.t0
    ends = np.append(path.jump_times[path.jump_times < t0 + horizon], t0 + horizon)
    starts = np.concatenate([[t0], ends[:-1]])
    sites = np.vstack([path.start[None], path.sites])[:len(ends)]
    ax = np.full(len(ends), axis, dtype=np.int64)
    total = envmod.cumulative_rates(env, sites, ax, starts, ends)
    return float(np.sum(total) / horizon)


def environment_average(env, observable="edge_rate", n_paths=20, horizon=1e4, seed=0, axis=0, threads=1,
                        grid_dt=0.1):
    """Time averages of a local observable along independent paths, with the s.e. across paths.

    observable is "edge_rate" (exact integral of the rate of (X_s, X_s + e_axis)) or a callable
    f(env, sites, times) evaluated on a time grid of spacing grid_dt.
    """
    _, _, paths = simulate_paths(env, n_paths, horizon, seed, [], threads=threads, record=True)
    vals = []
    for p in paths:
        if observable == "edge_rate":
            vals.append(edge_rate_average(env, p, horizon, axis))
        else:
            tg = p.t0 + grid_dt * (np.arange(int(round(horizon / grid_dt))) + 0.5)
            vals.append(float(np.mean(observable(env, p.position(tg), tg))))
    vals = np.array(vals)
    se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    return {"mean": float(vals.mean()), "se": se, "per_path": vals.tolist(), "horizon": float(horizon)}


# ---------------------------------------------------------------------------
# martingale property of harmonic coordinates


class HarmonicCoordinate:
    """psi(t_k, x) at stored times t_k for unwrapped sites x; component-wise.

    From a CorrectorField (all d components) or from a finite-horizon solution
    u = chi_e / n (component e only: psi_e = x_e + n u).
    """

    def __init__(self, times, L, fn, components):
        self.times, self.L, self._fn, self.components = np.asarray(times), L, fn, components

    @classmethod
    def from_corrector(cls, cf, static_times=None):
        """static_times: checkpoint grid for a time-independent (static) corrector."""
        if cf.static:
            times = np.concatenate([[0.0], np.asarray(static_times if static_times is not None else [], float)])
            return cls(times, cf.L, lambda k, x: cf.psi(0, x), list(range(cf.d)))
        return cls(cf.times, cf.L, cf.psi, list(range(cf.d)))

    @classmethod
    def from_finite_horizon(cls, sol, n, component=0):
        L = sol.u.shape[-1]

        def fn(k, x):
            xm = x % L
            return (x[:, component] + n * sol.u[k, 0][tuple(xm.T)])[:, None]

        return cls(sol.times, L, fn, [component])

    def __call__(self, k, x):
        return self._fn(k, np.atleast_2d(np.asarray(x, dtype=np.int64)))


def martingale_check(psi: HarmonicCoordinate, env, n_paths, seed, checkpoint_idx, sigma=None, threads=1,
                     slack=0.0):
    """Ensemble mean of psi(t_k, X_{t_k}) - psi(0, X_0) at stored checkpoints, against 3 s.e. (+ slack)."""
    cp_idx = [int(k) for k in checkpoint_idx]
    t0 = float(psi.times[0])
    cps = psi.times[cp_idx]
    pos, starts, _ = simulate_paths(env, n_paths, float(cps.max()), seed, cps, t0=t0, threads=threads)
    p0 = psi(0, starts)
    rows = []
    ok = True
    raw_ok = True
    for j, k in enumerate(cp_idx):
        inc = psi(k, pos[:, j]) - p0
        raw = (pos[:, j] - starts)[:, psi.components].astype(np.float64)
        m, se = inc.mean(axis=0), inc.std(axis=0, ddof=1) / np.sqrt(n_paths)
        rm, rse = raw.mean(axis=0), raw.std(axis=0, ddof=1) / np.sqrt(n_paths)
        holds = bool(np.all(np.abs(m) <= 3 * se + slack))
        ok &= holds
        raw_ok &= bool(np.all(np.abs(rm) <= 3 * rse))
        t = float(cps[j] - t0)
        row = {"t": t, "mean": m.tolist(), "se": se.tolist(), "raw_mean": rm.tolist(), "raw_se": rse.tolist(),
               "qv_rate": (inc.var(axis=0, ddof=1) / t).tolist() if t > 0 else None, "holds": holds}
        if sigma is not None:
            row["sigma_diag"] = [float(np.asarray(sigma)[c, c]) for c in psi.components]
        rows.append(row)
    return {"check": "martingale_drift", "rows": rows, "holds": bool(ok), "raw_within_3se": bool(raw_ok),
            "n_paths": n_paths}
