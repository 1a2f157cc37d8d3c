"""Command line: seeded experiment runs with JSON-lines/CSV output and report figures.

    dynrcm <subcommand> [--config cfg.yaml] [--seed S] [--threads N] [--out DIR]

Exit status: 0 if every hard assertion holds, 1 if one fails, 2 on an invalid config.
"""
from __future__ import annotations

import argparse
import copy
import math
import sys

import numpy as np
import yaml

from . import calibrate, heat, homogenize, kernels, moser, registry, rng, walk
from . import env as envmod
from .reports import Report

SUBCOMMANDS = ("env-stats", "walk", "diffusivity", "corrector", "sublinearity", "ip-test", "check", "moments")

DEFAULTS = {
    "seed": 0,
    "environment": {"model": "constant", "params": {}, "seed": None, "d": 2, "domain": None},
    "kernel": {"mu": 5.0, "nu": 2.5},
    "theta": None,
    "walk": {"t_max": 50.0, "n_paths": 1000, "n_export": 10, "env_seeds": None,
             "environment_average": None},
    "solver": {"eps": 0.0, "dt": 0.1, "L": 16, "tol": 1e-6, "t_window": 10.0, "stride": 10},
    "env_stats": {"n_edges": 10000, "q": [1, 2], "tolerance": 1e-8},
    "diffusivity": {"T": 50.0, "n_paths": 10000, "n_groups": 100, "n_se": 3.0, "rel_tol": 0.03},
    "corrector": {"martingale": None},
    "sublinearity": {"eps": 0.05, "n_list": [8, 16, 32], "dt": 0.1, "window_factor": 4.0, "allowance": 0.1,
                     "L": None, "tol": 1e-6},
    "ip": {"n": 100, "times": [1.0, 4.0], "directions": [[1.0, 0.0], [0.7071067811865476, 0.7071067811865476]],
           "alpha": 0.01, "n_paths": 2000, "env_seeds": [0, 1, 2, 3, 4], "min_accept": 4, "sigma": "auto",
           "sigma_paths": 4000, "sigma_T": 400.0},
    "moments": {"q": [1, 2], "n_samples": 10000, "tolerance": 1e-10, "n_se": 3.0},
    "check": {"suites": ["kernels", "tilde", "norms", "heat", "moser"], "n_fields": 1000, "n_energy": 50,
              "n_triples": 100000, "moser_quick": True,
              "kernel_pairs": [[5.0, 2.5], [6.0, 3.0], [7.0, 3.0], [9.0, 4.0], [4.5, 2.2], [8.0, 5.0]]},
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = problems
        super().__init__("; ".join(problems))


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, seed=None):
    user = {}
    if path:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError(["cli: config must be a mapping"])
    cfg = deep_merge(DEFAULTS, user)
    if seed is not None:
        cfg["seed"] = int(seed)
    if cfg["environment"].get("seed") is None:
        cfg["environment"]["seed"] = int(cfg["seed"])
    return cfg


def validate(cfg):
    """Every violated precondition, each prefixed by the module that owns it; also returns warnings."""
    errs, warns = [], []
    k = cfg["kernel"]
    mu, nu = k.get("mu"), k.get("nu")
    if not isinstance(mu, (int, float)) or not mu > 4:
        errs.append(f"kernels: μ > 4 required (got μ={mu})")
    elif not isinstance(nu, (int, float)) or not 2 < nu < mu - 2:
        errs.append(f"kernels: ν in (2, μ-2) required (got ν={nu}, μ={mu})")
    th = cfg.get("theta")
    if th is not None and isinstance(mu, (int, float)):
        if th <= 4 * 2:
            warns.append(f"homogenize: declared moment exponent ϑ={th} should exceed 4d")
        if not 4 < mu < th / 2:
            warns.append(f"homogenize: μ in (4, ϑ/2) = (4, {th / 2:g}) recommended (got μ={mu})")
    e = cfg["environment"]
    d = e.get("d", 2)
    if not isinstance(d, int) or d < 2:
        errs.append(f"env: d >= 2 required (got d={d})")
    model = e.get("model")
    p = e.get("params") or {}
    if model not in envmod.MODELS:
        errs.append(f"env: unknown model {model!r}; expected one of {list(envmod.MODELS)}")
    if model == "constant" and not 0 <= p.get("c", 1.0) <= 1:
        errs.append("env: constant conductance must lie in [0, 1]")
    if model == "static-layered" and not all(0 <= x <= 1 for x in p.get("layers", [0.5, 1.0])):
        errs.append("env: layer conductances must lie in [0, 1]")
    if model == "dyn-percolation":
        if "p" not in p or not 0 < p["p"] <= 1:
            errs.append(f"env: dyn-percolation needs p in (0, 1] (got {p.get('p')})")
        if p.get("refresh_rate", 1.0) <= 0:
            errs.append("env: refresh_rate must be positive")
        if not 0 <= p.get("floor", 0.0) < 1:
            errs.append("env: floor must lie in [0, 1)")
    if model in ("exclusion", "langevin") and not isinstance(e.get("domain"), int):
        errs.append(f"env: model {model!r} requires an integer torus side as domain")
    if model == "exclusion" and not 0 <= p.get("particle_density", -1) <= 1:
        errs.append("env: exclusion needs particle_density in [0, 1]")
    w = cfg["walk"]
    if not w["t_max"] > 0:
        errs.append("walk: t_max > 0 required")
    if not w["n_paths"] >= 1:
        errs.append("walk: n_paths >= 1 required")
    s = cfg["solver"]
    if not s["dt"] > 0:
        errs.append("heat: dt > 0 required")
    if s["eps"] < 0:
        errs.append("heat: eps >= 0 required")
    if not isinstance(s["L"], int) or s["L"] < 2:
        errs.append("heat: torus side L >= 2 required")
    elif isinstance(e.get("domain"), int) and e["domain"] != s["L"]:
        errs.append(f"heat: solver torus L={s['L']} must match the environment period {e['domain']}")
    if s["eps"] > 0 and s["dt"] > heat.stability_bound(d if isinstance(d, int) else 2, s["eps"], s["eps"]):
        errs.append(f"heat: dt={s['dt']} violates the explicit stability bound")
    dd = cfg["diffusivity"]
    if dd["n_paths"] < homogenize.MIN_PATHS:
        errs.append(f"homogenize: diffusivity ensemble needs >= {homogenize.MIN_PATHS} paths")
    if not dd["T"] > 0:
        errs.append("homogenize: diffusivity horizon T > 0 required")
    ip = cfg["ip"]
    if not 0 < ip["alpha"] < 1:
        errs.append("homogenize: ip alpha in (0, 1) required")
    if ip["min_accept"] > len(ip["env_seeds"]):
        errs.append("homogenize: ip min_accept exceeds the number of environment seeds")
    sb = cfg["sublinearity"]
    if sb["eps"] <= 0:
        errs.append("homogenize: sublinearity needs eps > 0")
    if sb["L"] is not None and sb["L"] < 2 * max(sb["n_list"]) + 1:
        errs.append("homogenize: torus too small for the largest n")
    for q in cfg["moments"]["q"]:
        if not q > 0:
            errs.append(f"homogenize: moment order q > 0 required (got {q})")
    return errs, warns


# ---------------------------------------------------------------------------
# subcommands


def _env(cfg, seed=None, domain="keep"):
    spec = dict(cfg["environment"])
    if seed is not None:
        spec["seed"] = int(seed)
    if domain != "keep":
        spec["domain"] = domain
    return envmod.make_environment(spec)


def _kernel(cfg):
    return kernels.polynomial_pair(cfg["kernel"]["mu"], cfg["kernel"]["nu"])


def known_sigma(spec):
    """Exact Sigma for constant and static-layered environments, else None."""
    d = spec.get("d", 2)
    p = spec.get("params") or {}
    if spec["model"] == "constant":
        return 2.0 * p.get("c", 1.0) * np.eye(d)
    if spec["model"] == "static-layered":
        lay = np.asarray(p.get("layers", [0.5, 1.0]), float)
        if np.any(lay <= 0):
            return None
        s = np.diag([2.0 * np.mean(lay)] * d)
        s[0, 0] = 2.0 / np.mean(1.0 / lay)
        return s
    return None


def run_env_stats(cfg, rep, args):
    c = cfg["env_stats"]
    env = _env(cfg)
    mu = cfg["kernel"]["mu"]
    wl = envmod.check_weight_lower_bound(env, c["n_edges"], cfg["seed"], mu, c["tolerance"])
    smp = wl.pop("_samples")
    rep.add(wl)
    rep.hard("weight lower bound w_0(e) >= k(T_e)", wl["holds"], violations=wl["violations"])
    for q in c["q"]:
        est = envmod.moment_estimates(env, q, q + 1, c["n_edges"], cfg["seed"], mu)
        est.pop("_samples")
        rep.add(dict(est, check="moments"))
    rep.add({"check": "rate_summary", "mean_rate": float(np.mean(env.rate(*envmod.sample_edges(env, c["n_edges"],
                                                                                               cfg["seed"]), 0.0)))})
    from . import plots
    plots.weight_scatter(smp["T"], smp["w"], smp["kT"], rep.out / "env-stats_weights.png")
    rep.files.append("env-stats_weights.png")


def run_walk(cfg, rep, args):
    w = cfg["walk"]
    spec = cfg["environment"]
    seeds = w["env_seeds"] or [spec["seed"]]
    ens = walk.batch_simulate(spec, seeds, w["n_paths"], w["t_max"], cfg["seed"], threads=args.threads)
    D = ens.displacement()
    rep.add({"check": "walk_summary", "mode": ens.mode, "n_paths": ens.n_paths, "t_max": w["t_max"],
             "mean_displacement": D.mean(axis=0), "var_over_t": D.var(axis=0, ddof=1) / w["t_max"]})
    n_exp = min(w["n_export"], w["n_paths"])
    env = _env(cfg, seeds[0])
    _, _, paths = walk.simulate_paths(env, n_exp, w["t_max"], rng.child_seed(cfg["seed"], seeds[0]), [],
                                      threads=args.threads, record=True)
    rows, ok = [], True
    for p in paths:
        steps = np.abs(np.diff(np.vstack([p.start, p.sites]), axis=0)).sum(axis=1)
        ok &= bool(np.all(steps == 1)) and bool(np.all(np.diff(p.jump_times) > 0))
        rows += p.to_csv_rows()
    d = env.d
    rep.csv("walk_paths.csv", ["path_id", "t"] + [f"x{i + 1}" for i in range(d)], rows)
    rep.hard("walk paths make nearest-neighbour jumps at increasing times", ok, n_paths=len(paths))
    avg = w.get("environment_average")
    if avg:
        res = walk.environment_average(env, "edge_rate", avg.get("n_paths", 20), avg.get("horizon", 1e4),
                                       cfg["seed"], threads=args.threads)
        res.pop("per_path")
        target = None
        prm = spec.get("params") or {}
        if spec["model"] == "dyn-percolation":
            fl = prm.get("floor", 0.0)
            target = fl + (1 - fl) * prm["p"]
        elif spec["model"] == "constant":
            target = prm.get("c", 1.0)
        rep.add(dict(res, check="environment_average", target=target))
        if target is not None:
            rep.hard("ergodic average of the walker-adjacent edge rate", abs(res["mean"] - target) <= 3 * res["se"]
                     + 1e-12, mean=res["mean"], se=res["se"], target=target)
    from . import plots
    plots.sample_paths(paths, rep.out / "walk_paths.png")
    rep.files.append("walk_paths.png")


def _corrector(cfg, env, eps=None):
    s = cfg["solver"]
    eps = s["eps"] if eps is None else eps
    return heat.solve_regularized_corrector(env, eps, s["L"], dt=s["dt"], t_window=s["t_window"], tol=s["tol"],
                                            stride=s["stride"])


def run_diffusivity(cfg, rep, args):
    c = cfg["diffusivity"]
    spec = cfg["environment"]
    ens = walk.batch_simulate(spec, [spec["seed"]], c["n_paths"], c["T"], cfg["seed"], threads=args.threads)
    est = homogenize.estimate_sigma_mc(ens.displacement(), c["T"], ens.mode, c["n_groups"])
    rep.add(dict(est.to_dict(), check="sigma_mc"))
    L = cfg["solver"]["L"]
    cf = None
    env_c = _env(cfg, domain=L)
    if env_c.is_static or cfg["solver"]["eps"] > 0:
        cf = _corrector(cfg, env_c)
        rep.add({"check": "sigma_corrector", "sigma": cf.sigma, "eps": cf.eps, "L": L, "residual": cf.residual})
    target = known_sigma(spec)
    if target is not None:
        ok, z = homogenize.sigma_agreement(target, est, c["n_se"])
        rep.hard("Monte Carlo diffusivity matches the exact Sigma within n_se jackknife s.e.", ok, z_scores=z,
                 target=target)
        diag = np.diag(est.sigma) / np.diag(target) - 1
        rep.hard("Monte Carlo diffusivity within the relative tolerance", bool(np.all(np.abs(diag) <= c["rel_tol"])),
                 rel_error=diag)
        if cf is not None:
            err = float(np.abs(cf.sigma - target).max())
            tol = 1e-8 if spec["model"] == "constant" else c["rel_tol"] * np.abs(target).max()
            rep.hard("corrector diffusivity matches the exact Sigma", err <= tol, abs_error=err, tolerance=tol)
    if cf is not None:
        ok, z = homogenize.sigma_agreement(cf.sigma, est, c["n_se"])
        rep.hard("Monte Carlo and corrector diffusivities agree within combined error bars", ok, z_scores=z)
    from . import plots
    plots.displacement_histogram(ens.displacement(), c["T"], est.sigma, rep.out / "diffusivity_hist.png")
    rep.files.append("diffusivity_hist.png")


def run_corrector(cfg, rep, args):
    s = cfg["solver"]
    env = _env(cfg, domain=s["L"])
    cf = _corrector(cfg, env)
    rep.add({"check": "corrector", "sigma": cf.sigma, "eps": cf.eps, "L": cf.L, "static": cf.static,
             "residual": cf.residual, "apriori": cf.apriori})
    hc = heat.harmonicity_and_cocycle(cf)
    rep.add(hc)
    rep.hard("corrector is a cocycle under torus shifts", hc["holds"], cocycle=hc["cocycle_residual"])
    if cf.static:
        rep.hard("static corrector solves the cell problem to 1e-8", cf.residual["solver_residual"] < 1e-8,
                 residual=cf.residual["solver_residual"])
    else:
        ap = heat.apriori_check(cf)
        rep.add(ap)
        rep.hard("a-priori bounds eps |phi|^2 <= d and Dirichlet energy <= d", ap["holds"])
    target = known_sigma(cfg["environment"])
    if target is not None and cf.static:
        err = float(np.abs(cf.sigma - target).max())
        tol = 1e-8 if cfg["environment"]["model"] == "constant" else 0.03 * np.abs(target).max()
        rep.hard("corrector diffusivity matches the exact Sigma", err <= tol, sigma=cf.sigma, target=target)
    chi = cf.chi[0, 0]
    rep.csv("corrector_chi.csv", ["x1", "x2", "chi1"], [(i, j, float(chi[i, j])) for i in range(chi.shape[0])
                                                         for j in range(chi.shape[1])] if env.d == 2 else [])
    m = cfg["corrector"].get("martingale")
    if m:
        res = _martingale(cfg, env, cf, m, args.threads)
        rep.add(res)
        rep.hard("martingale drift of psi(t, X_t) within 3 s.e.", res["holds"])
    from . import plots
    if env.d == 2:
        plots.field_heatmap(chi, rep.out / "corrector_chi.png", "chi_1 at t = 0")
        rep.files.append("corrector_chi.png")


def _martingale(cfg, env, cf, m, threads):
    cps = m.get("checkpoints", [5.0, 10.0, 20.0, 30.0, 40.0])
    n_paths = m.get("n_paths", 4000)
    seed = rng.child_seed(cfg["seed"], 77)
    if cf.static:
        psi = walk.HarmonicCoordinate.from_corrector(cf, cps)
        return walk.martingale_check(psi, env, n_paths, seed, list(range(1, len(cps) + 1)), cf.sigma, threads)
    # time-dependent: finite-horizon harmonic coordinate in the cell-averaged environment
    s = cfg["solver"]
    n = m.get("n", 8)
    T = float(max(cps))
    stride = max(1, int(round(1.0 / s["dt"])))
    ce = envmod.CellEnvironment.from_env(env, 0.0, s["dt"], int(round(T / s["dt"])) + 1)
    sol = heat.solve_finite_horizon(ce, s["L"], s["dt"], T, T, n, stride, keep_rates=False)
    psi = walk.HarmonicCoordinate.from_finite_horizon(sol, n, 0)
    idx = [int(round(t / sol.store_dt)) for t in cps]
    return walk.martingale_check(psi, ce, n_paths, seed, idx, None, threads)


def run_sublinearity(cfg, rep, args):
    c = cfg["sublinearity"]
    L = c["L"] or 2 * max(c["n_list"]) + 2
    env = _env(cfg, domain=L)
    prof = homogenize.sublinearity_profile(env, c["eps"], c["n_list"], _kernel(cfg), L, c["dt"], c["window_factor"],
                                           c["tol"], np.float32, c["allowance"])
    d = prof.to_dict()
    rep.add(dict(d, check="sublinearity"))
    rep.csv("sublinearity_profile.csv", ["n", "max_profile", "norm_profile"],
            list(zip(prof.n, prof.max_profile, prof.norm_profile)))
    # a trend diagnostic, reported but not a hard assertion
    rep.add({"check": "sublinearity_trend", "diagnostic": True, "decreasing": d["trend_decreasing"]})
    from . import plots
    plots.sublinearity(d, rep.out / "sublinearity.png")
    rep.files.append("sublinearity.png")


def _ip_sigma(cfg, args):
    c = cfg["ip"]
    spec = cfg["environment"]
    mode = c["sigma"]
    if isinstance(mode, list):
        return np.asarray(mode, float), "given"
    target = known_sigma(spec)
    if mode in ("auto", "exact") and target is not None:
        return target, "exact"
    if mode == "exact":
        raise ValueError("homogenize: no exact Sigma known for this environment")
    # independent annealed Monte Carlo run on environment seeds disjoint from the tested ones
    seeds = [10 ** 6 + i for i in range(len(c["env_seeds"]))]
    n_per = max(homogenize.MIN_PATHS, c["sigma_paths"] // len(seeds))
    ens = walk.batch_simulate(spec, seeds, n_per, c["sigma_T"], rng.child_seed(cfg["seed"], 99), threads=args.threads)
    est = homogenize.estimate_sigma_mc(ens.displacement(), c["sigma_T"], "annealed")
    return est.sigma, "annealed-mc"


def run_ip_test(cfg, rep, args):
    c = cfg["ip"]
    spec = cfg["environment"]
    sigma, src = _ip_sigma(cfg, args)
    rep.add({"check": "ip_sigma", "sigma": sigma, "source": src})
    n, times = c["n"], [float(t) for t in c["times"]]
    cps = [t * n for t in times]
    accepted, rows_all = 0, []
    for es in c["env_seeds"]:
        env = _env(cfg, es)
        pos, st, _ = walk.simulate_paths(env, c["n_paths"], max(cps), rng.child_seed(cfg["seed"], es), cps,
                                         threads=args.threads)
        res = homogenize.ip_test(pos - st[:, None], times, n, sigma, c["directions"], c["alpha"],
                                 jitter_seed=rng.child_seed(cfg["seed"], es + 7))
        accepted += not res["rejected"]
        rows_all = res["rows"]
        rep.add(dict(res, env_seed=es))
    rep.hard("quenched invariance principle not rejected for at least min_accept environment seeds",
             accepted >= c["min_accept"], accepted=accepted, n_seeds=len(c["env_seeds"]))
    ctrl = homogenize.ip_test(homogenize.ballistic_control(c["n_paths"], times, n, len(sigma)), times, n, sigma,
                              c["directions"], c["alpha"], jitter_seed=1)
    rep.add(dict(ctrl, control="ballistic"))
    rep.hard("ballistic negative control rejected", ctrl["rejected"])
    from . import plots
    plots.ks_pvalues(rows_all, rep.out / "ip_pvalues.png", c["alpha"])
    rep.files.append("ip_pvalues.png")


def run_moments(cfg, rep, args):
    c = cfg["moments"]
    env = _env(cfg)
    rows = []
    for q in c["q"]:
        r = homogenize.check_moment_lemma(env, q, c["n_samples"], cfg["seed"], cfg["kernel"]["mu"], c["tolerance"],
                                          c["n_se"])
        rows.append(r)
        rep.add(r)
        if r["applicable"]:
            rep.hard(f"moment comparison E T^(q+1) <= (E a^-q)^((q+1)/q) at q={q}", r["holds"])
        else:
            rep.add({"record": "warning", "message": f"homogenize: moment comparison at q={q} not asserted, "
                                                      "environment is not ergodic under time shifts"})
        rep.hard(f"weight moment bound E w^-q <= (int k)^-q E a^-q at q={q}", r["jensen"]["holds"])
    from . import plots
    plots.moment_bars(rows, rep.out / "moments.png")
    rep.files.append("moments.png")


def _suite_summary(rep, name, recs, key="holds"):
    bad = [r for r in recs if not r.get(key, True)]
    rep.hard(name, not bad, n=len(recs), violations=len(bad))


def run_check(cfg, rep, args):
    c = cfg["check"]
    suites = c["suites"]
    reg = registry.load()
    all_recs = []
    if "kernels" in suites:
        for mu, nu in c["kernel_pairs"]:
            k = kernels.polynomial_pair(mu, nu)
            a = kernels.c1_estimate(k, n_grid=201)
            b = kernels.c1_estimate(k, n_grid=401)
            rel = abs(a - b) / b
            rec = {"check": "convolution_bound", "params": {"mu": mu, "nu": nu}, "c1": b, "c1_coarse": a,
                   "grid_change": rel, "holds": bool(math.isfinite(b) and rel < 0.05)}
            rep.add(rec)
            all_recs.append(rec)
            rep.hard(f"kernel convolution constant c1 finite and grid-stable (mu={mu}, nu={nu})", rec["holds"])
    if "tilde" in suites:
        r = calibrate.tilde_suite(c["n_triples"])
        rep.add(r)
        rep.hard("(|a|^(2l-2) + |b|^(2l-2)) (b-a)^2 <= 8 (b~^l - a~^l)^2", r["holds"], violations=r["violations"])
    if "norms" in suites:
        recs = calibrate.sobolev_suite(c["n_fields"], reg=reg)
        for name in sorted({r["check"] for r in recs}):
            sub = [r for r in recs if r["check"] == name]
            _suite_summary(rep, f"{name.replace('_', ' ')} inequality on the random corpus", sub)
            ratios = [r.get("ratio", 0.0) for r in sub if isinstance(r.get("ratio"), float)]
            rep.add({"check": name, "n": len(sub), "max_ratio": max(ratios) if ratios else None})
        all_recs += recs
    if "heat" in suites:
        recs = calibrate.energy_conversion_suite(c["n_energy"])
        for r in recs:
            rep.add(r)
        _suite_summary(rep, "pointwise energy conversion with constants 48d^2 and 24d",
                       [r for r in recs if r["check"] == "energy_conversion"])
        _suite_summary(rep, "pointwise energy conversion with the derived kernel",
                       [r for r in recs if r["check"] == "energy_conversion"], "holds_derived")
        _suite_summary(rep, "time-integrated energy conversion",
                       [r for r in recs if r["check"] == "energy_conversion_integrated"])
        all_recs += recs
    if "moser" in suites:
        ex = moser.Exponents.from_rs(2, 5.0, 5.0, 2.0)
        c1 = kernels.c1_for_scales(kernels.KernelPair(5.0, 2.5), 16)
        recs = []
        for spec in calibrate.moser_corpus(c["moser_quick"]):
            F = calibrate.build_field(spec)
            for j in range(1, moser.max_rung(F.n, 2.0, 1.0) + 1):
                pr = moser.make_cutoffs(F.n, j, rho=ex.rho_default)
                recs.append(dict(pr.report, instance=spec["label"]))
            recs += calibrate.moser_reports(F, ex, c1, reg, label=spec["label"])
        for r in recs:
            rep.add(r)
        for name, title in (("cutoff_adapted", "cut-off pairs adapted"),
                            ("energy_estimate", "energy estimate against the registry constant"),
                            ("dirichlet_conversion", "Dirichlet-form conversion against the registry constant"),
                            ("one_step", "one-step iteration estimate against the registry constant"),
                            ("maximal_inequality", "maximal inequality against the registry constants")):
            _suite_summary(rep, title, [r for r in recs if r["check"] == name])
        rep.csv("moser_ladder.csv", ["instance", "k", "lambda1", "p_exp", "q_exp", "lhs", "rhs_norm", "gamma",
                                     "A_without_c2", "log_c2_implied"],
                [(r["instance"], r["k"], r["lambda1"], r["p_exp"], r["q_exp"], r["lhs"], r["rhs_norm"], r["gamma"],
                  r["A_without_c2"], r["log_c2_implied"]) for r in recs if r["check"] == "one_step"])
        all_recs += recs
    from . import plots
    plots.ratio_histogram(all_recs, rep.out / "check_ratios.png")
    rep.files.append("check_ratios.png")


RUNNERS = {"env-stats": run_env_stats, "walk": run_walk, "diffusivity": run_diffusivity, "corrector": run_corrector,
           "sublinearity": run_sublinearity, "ip-test": run_ip_test, "check": run_check, "moments": run_moments}


def build_parser():
    ap = argparse.ArgumentParser(prog="dynrcm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--out", default="out", help="output directory")
    return ap


def main(argv=None, timestamp=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        errs, warns = validate(cfg)
        if errs:
            raise ConfigError(errs)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("invalid configuration:\n  - cli: --threads >= 1 required", file=sys.stderr)
        return 2
    rep = Report(args.out, args.command, cfg, timestamp)
    for w in warns:
        rep.add({"record": "warning", "message": w})
        print(f"warning: {w}", file=sys.stderr)
    RUNNERS[args.command](cfg, rep, args)
    path = rep.write()
    for f in rep.failures:
        print(f"FAILED: {f}", file=sys.stderr)
    print(f"{args.command}: {len(rep.records)} records -> {path} ({'ok' if rep.ok else 'FAILED'})")
    return 0 if rep.ok else 1


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
