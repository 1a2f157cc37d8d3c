"""Random test corpora and calibration of the constants registry.

Every registry entry records its value, the oracle that produced it and the
corpus statistics seen during calibration.  Calibration is deterministic, so
rerunning it reproduces the registry.
"""
from __future__ import annotations

import math

import numpy as np

from . import env as envmod
from . import moser, norms, registry
from .kernels import KernelPair, c1_for_scales
from .lattice import Box, edge_set

VERSION = 1
SOBOLEV_CASES = ((2, 2.5, 10 / 7), (2, 2.0, 1.0), (3, 2.0, 1.0))
MOSER_MARGIN = 2.0


# ---------------------------------------------------------------------------
# random fields


FAMILIES = ("gaussian", "sparse", "indicator", "smooth", "heavy")


def random_site_field(rng: np.random.Generator, shape, family):
    size = int(np.prod(shape))
    if family == "gaussian":
        return rng.normal(size=size)
    if family == "sparse":
        v = np.zeros(size)
        k = rng.integers(1, max(2, size // 4) + 1)
        v[rng.choice(size, k, replace=False)] = rng.normal(size=k) * rng.exponential(2.0)
        return v
    if family == "indicator":
        return (rng.random(size) < rng.uniform(0.1, 0.9)).astype(float) * rng.choice([-1.0, 1.0])
    if family == "smooth":
        grids = np.meshgrid(*[np.arange(m) for m in shape], indexing="ij")
        v = np.zeros(shape)
        for _ in range(3):
            k = rng.uniform(0, 1.5, size=len(shape))
            ph = rng.uniform(0, 2 * np.pi)
            v += rng.normal() * np.cos(sum(kk * g for kk, g in zip(k, grids)) + ph)
        return v.ravel()
    if family == "heavy":
        return rng.standard_t(1.5, size=size)
    raise ValueError(f"unknown family {family!r}")


def site_corpus(n_fields, d, seed, sides=(2, 3, 4, 6, 8)):
    """(values, box) pairs cycling through families and box sides."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_fields):
        side = sides[i % len(sides)] if d == 2 else min(sides[i % len(sides)], 5)
        B = Box((0,) * d, (side - 1,) * d)
        v = random_site_field(rng, B.shape, FAMILIES[i % len(FAMILIES)])
        if not np.any(v):
            v[0] = 1.0
        out.append((v, B))
    return out


def spacetime_corpus(n_fields, d, seed, nt=17, dt=0.25, sides=(2, 3, 4), w_range=(0.1, 1.0)):
    """(f, w) SpaceTimeField pairs on boxes with weights uniform in w_range on E(B)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_fields):
        side = sides[i % len(sides)]
        B = Box((0,) * d, (side - 1,) * d)
        E = edge_set(B)
        prof = np.abs(rng.normal(size=(nt, 1))) + 0.1 * rng.random()
        space = np.stack([random_site_field(rng, B.shape, FAMILIES[(i + k) % len(FAMILIES)]) for k in range(2)])
        mix = rng.random((nt, 1))
        vals = prof * (mix * space[0] + (1 - mix) * space[1])
        if not np.any(vals):
            vals[0, 0] = 1.0
        w = rng.uniform(*w_range, size=(nt, len(E)))
        out.append((norms.SpaceTimeField(vals, 0.0, dt, B), norms.SpaceTimeField(w, 0.0, dt, E)))
    return out


# ---------------------------------------------------------------------------
# Sobolev constants


def calibrate_l1_sobolev(d, max_side=20):
    """sup of the l1-Sobolev ratio over cube indicators of side 1..max_side."""
    ratios = []
    for m in range(1, max_side + 1):
        B = Box((0,) * d, (m - 1,) * d)
        ratios.append(norms.check_l1_sobolev(np.ones(B.size), B)["ratio"])
    sup = max(ratios)
    return {"value": sup * (1 + 1e-9), "empirical_sup": sup, "derived": 1.0 / (2 * d),
            "oracle": f"sup over cube indicators of side 1..{max_side}",
            "note": "equals 1/(2d) by the discrete Loomis-Whitney inequality and the co-area formula"}


def _exhaustive_set_sup(shape):
    n = int(np.prod(shape))
    best = 0.0
    for bits in range(1, 2 ** n - 1):
        mask = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool).reshape(shape)
        best = max(best, norms.set_poincare_ratio(mask))
    return best


def calibrate_box_sobolev(d, exhaustive_shapes=None, max_side=20):
    """sup over subsets A of 2|A||A^c| / (|B|^{1+1/d} |boundary of A in B|).

    For indicator fields the box-Sobolev ratio equals this quantity and by co-area its sup over
    sets bounds the ratio for every field on the same box.  Exhaustive on small boxes, half-box
    cuts up to max_side.
    """
    if exhaustive_shapes is None:
        exhaustive_shapes = [(2, 2), (3, 3), (4, 4)] if d == 2 else [(2, 2, 2)]
    ex = {"x".join(map(str, s)): float(_exhaustive_set_sup(s)) for s in exhaustive_shapes}
    half = []
    for m in range(2, max_side + 1):
        mask = np.zeros((m,) * d, dtype=bool)
        mask[: m // 2] = True
        half.append(float(norms.set_poincare_ratio(mask)))
    sup = max(list(ex.values()) + half)
    return {"value": sup * (1 + 1e-9), "empirical_sup": sup, "exhaustive": ex, "half_space_sup": max(half),
            "oracle": f"exhaustive subsets of {sorted(ex)} and half-box cuts of side 2..{max_side}"}


def calibrate_c0(d, alpha, beta, n_fields=500, seed=7, kernel=None):
    """Explicit provable c0 with the implied sup on a random (f, w) corpus recorded."""
    kernel = kernel or KernelPair(5.0, 2.5)
    c0 = norms.c0_bound(d, alpha, beta)
    sup = 0.0
    for f, w in spacetime_corpus(n_fields, d, seed + d):
        rep = norms.check_weighted_sobolev(f, w, alpha, beta, kernel, 1.0, c0)
        sup = max(sup, rep["implied_c0"])
    return {"value": c0, "empirical_sup": sup, "oracle": "explicit bound alpha c(d) (2d)^{1/p} 2^{1/2+1/r}",
            "corpus": f"{n_fields} random (f, w) pairs, w uniform on [0.1, 1], seed {seed + d}",
            "params": {"d": d, "alpha": alpha, "beta": beta}}


# ---------------------------------------------------------------------------
# iteration constants


def moser_corpus(quick=False):
    """Frozen corpus: (label, n, env factory, terminal) specs."""
    specs = []
    for n in (4, 8):
        L = 4 * n + 2
        for i, (c, w, h) in enumerate([((0, 0), n, 1.0), ((1, -2), n / 2, 3.0), ((n, 0), 2 * n, 0.5)]):
            specs.append({"label": f"constant/n={n}/bump{i}", "n": n, "L": L,
                          "env": {"model": "constant", "params": {"c": 1.0}, "seed": 0, "d": 2, "domain": L},
                          "terminal": {"centre": c, "width": w, "height": h}})
    seeds = ((4, 1), (8, 1)) if quick else ((4, 1), (4, 2), (8, 1), (8, 2), (16, 3))
    for n, s in seeds:
        L = 4 * n + 2
        specs.append({"label": f"dyn-percolation/n={n}/seed{s}", "n": n, "L": L,
                      "env": {"model": "dyn-percolation", "params": {"p": 0.7, "refresh_rate": 1.0}, "seed": s,
                              "d": 2, "domain": L}, "terminal": None})
    return specs


def build_field(spec, kernel=None):
    env = envmod.make_environment(spec["env"])
    term = None
    if spec.get("terminal"):
        t = spec["terminal"]
        term = moser.bump_terminal(spec["L"], 2, t["centre"], t["width"], t["height"])
    return moser.moser_field(env, spec["n"], L=spec["L"], kernel=kernel, terminal=term)


def moser_reports(F, ex: moser.Exponents, c1, reg=None, lambdas=(1, 2, 4), label=""):
    """Energy and conversion checks on every rung's inner cut-off, the ladder and the maximal report."""
    rho = ex.rho_default
    out = []
    for j in range(1, moser.max_rung(F.n, 2.0, 1.0) + 1):
        cut = moser.make_cutoffs(F.n, j, rho=rho).inner
        for lam in lambdas:
            out.append(dict(moser.check_energy_estimate(F, cut, lam, reg), instance=label, j=j))
            out.append(dict(moser.check_dirichlet_conversion(F, cut, lam, c1, reg), instance=label, j=j))
    lad = moser.iterate(F, ex, reg=reg)
    out += [dict(r, instance=label) for r in lad.to_records()]
    return out


def calibrate_moser(quick=False, kernel=None, margin=MOSER_MARGIN):
    kernel = kernel or KernelPair(5.0, 2.5)
    ex = moser.Exponents.from_rs(2, 5.0, 5.0, 2.0)
    c1 = c1_for_scales(kernel, 16)
    empty = {"constants": {}}
    rows = []
    for spec in moser_corpus(quick):
        F = build_field(spec, kernel)
        for r in moser_reports(F, ex, c1, empty, label=spec["label"]):
            rows.append(dict(r, n=spec["n"]))
    pick = {"c11": ("energy_estimate", "ratio", False), "c10": ("dirichlet_conversion", "ratio", False),
            "c2": ("one_step", "log_c2_implied", True), "c7": ("maximal_inequality", "c7_implied", False)}
    out = {}
    for name, (check, key, is_log) in pick.items():
        vals = [(r["n"], r[key]) for r in rows if r["check"] == check]
        by_n = {}
        for n, v in vals:
            v = math.exp(v) if is_log else v
            by_n[n] = max(by_n.get(n, 0.0), v)
        sup = max(by_n.values())
        common = [by_n[n] for n in (4, 8) if n in by_n]
        stab = max(common) / min(common) if len(common) == 2 and min(common) > 0 else None
        out[name] = {"value": margin * sup, "empirical_sup": sup, "by_n": {str(k): v for k, v in sorted(by_n.items())},
                     "stability_ratio_n4_n8": stab, "margin": margin,
                     "oracle": f"{margin} x sup of the implied constant on the frozen corrector corpus",
                     "corpus": [s["label"] for s in moser_corpus(quick)]}
    out["c1_used"] = c1
    return out


# ---------------------------------------------------------------------------
# inequality suites on the frozen corpora


def sobolev_suite(n_fields=1000, seed=11, reg=None, kernel=None):
    """Records of the six Sobolev-type checks against registry constants."""
    reg = reg if reg is not None else registry.load()
    kernel = kernel or KernelPair(5.0, 2.5)
    recs = []
    for d in (2, 3):
        c_l1 = registry.value(f"c_l1[d={d}]", reg)
        c_box = registry.value(f"c_box[d={d}]", reg)
        for v, B in site_corpus(n_fields // 2, d, seed + d):
            recs.append(norms.check_l1_sobolev(v, B, c_l1))
            recs.append(norms.check_box_sobolev(v - v.mean(), B, c_box))
    cases = SOBOLEV_CASES
    for i, (f, w) in enumerate(spacetime_corpus(n_fields, 2, seed + 100)):
        d, a, b = cases[i % 2]
        rep = norms.check_weighted_sobolev(f, w, a, b, kernel, 1.0, registry.value(registry.c0_key(d, a, b), reg))
        tail = rep.pop("tailored")
        recs.append(rep)
        if tail is not None:
            recs.append(tail)
        recs.append(norms.check_interpolation(f, None, None, 1.0, 4.0, 1.0, 4.0, 0.5, kernel, 1.0))
        recs.append(norms.check_monotonicity(f, zeta=kernel, r=1.0))
    for f, w in spacetime_corpus(n_fields // 10, 3, seed + 200, sides=(2, 3)):
        d, a, b = cases[2]
        rep = norms.check_weighted_sobolev(f, w, a, b, kernel, 1.0, registry.value(registry.c0_key(d, a, b), reg))
        tail = rep.pop("tailored")
        recs.append(rep)
        if tail is not None:
            recs.append(tail)
    return recs


ENERGY_ENVS = (
    {"model": "constant", "params": {"c": 1.0}},
    {"model": "constant", "params": {"c": 0.5}},
    {"model": "static-layered", "params": {"layers": [0.5, 1.0]}},
    {"model": "dyn-percolation", "params": {"p": 0.5}},
    {"model": "dyn-percolation", "params": {"p": 0.7, "floor": 0.2}},
    {"model": "exclusion", "params": {"particle_density": 0.5}},
)


def energy_conversion_suite(n_problems=50, seed=21, kernel=None, dt=0.02, horizon=None, n_samples=10,
                            window_cells=200, sides=(4, 8, 12, 16)):
    """Solved heat problems on mixed environments and boxes; pointwise and integrated checks."""
    from . import heat

    kernel = kernel or KernelPair(5.0, 2.5)
    H = horizon or envmod.KernelWeightSpec.for_tolerance(kernel.mu, 1e-6).horizon
    c1 = c1_for_scales(kernel, 16)
    rng = np.random.default_rng(seed)
    nh = int(math.ceil(H / dt))
    n_steps = window_cells + nh
    recs = []
    for i in range(n_problems):
        side = sides[i % len(sides)]
        L = side + 8
        L += L % 2
        spec = dict(ENERGY_ENVS[i % len(ENERGY_ENVS)], seed=int(seed * 1000 + i), d=2, domain=L)
        env = envmod.make_environment(spec)
        lo = 4
        B = Box((lo, lo), (lo + side - 1, lo + side - 1))
        u0 = np.zeros((L, L))
        u0[lo - 2:lo + side + 2, lo - 2:lo + side + 2] = rng.normal(size=(side + 4, side + 4))
        src = None
        if i % 2 == 0:
            amp = rng.normal(size=(L, L)) * 0.2
            src = np.sin(0.05 * np.arange(n_steps) + rng.uniform(0, 6))[:, None, None] * amp[None]
        sol = heat.solve_heat(heat.HeatProblem(env, L, dt, n_steps, u0, source=src))
        r = float(rng.choice([1.0, 4.0, 16.0]))
        idx = sorted(rng.choice(window_cells, n_samples, replace=False).tolist())
        rep = heat.check_energy_conversion(sol, B, kernel, idx, H, zeta_r=r, c1=c1, window_cells=window_cells)
        for rec in rep["pointwise"]:
            rec["instance"] = i
            rec["model"] = spec["model"]
            recs.append(rec)
        rep["integrated"]["instance"] = i
        rep["integrated"]["model"] = spec["model"]
        recs.append(rep["integrated"])
    return recs


def tilde_suite(n=10 ** 5, seed=31):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-10, 10, n)
    b = rng.uniform(-10, 10, n)
    lam = rng.uniform(1, 8, n)
    return moser.check_tilde_inequality(a, b, lam)


# ---------------------------------------------------------------------------
# registry


def calibrate_all(quick=False):
    consts = {}
    for d in (2, 3):
        consts[f"c_l1[d={d}]"] = calibrate_l1_sobolev(d)
        consts[f"c_box[d={d}]"] = calibrate_box_sobolev(d)
    for d, a, b in SOBOLEV_CASES:
        consts[registry.c0_key(d, a, b)] = calibrate_c0(d, a, b, n_fields=100 if quick else 500)
    mos = calibrate_moser(quick)
    mos.pop("c1_used")
    consts.update(mos)
    consts["tilde"] = {"value": 8.0, "oracle": "explicit constant of the algebraic inequality, not calibrated"}
    return {"version": VERSION, "constants": consts}


def compare(reg_a, reg_b, rel=0.02):
    """Names whose values differ by more than rel between two registries."""
    bad = {}
    for k, e in reg_a["constants"].items():
        other = reg_b["constants"].get(k)
        if other is None:
            bad[k] = "missing"
            continue
        a, b = e["value"], other["value"]
        if abs(a - b) > rel * max(abs(a), abs(b)):
            bad[k] = (a, b)
    return bad


def main():
    reg = calibrate_all()
    registry.save(reg)
    for k, e in sorted(reg["constants"].items()):
        print(f"{k}: {e['value']:.6g}")


if __name__ == "__main__":
    main()
