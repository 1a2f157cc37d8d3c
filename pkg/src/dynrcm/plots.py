"""Report figures (matplotlib, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def displacement_histogram(D, T, sigma, path):
    """Marginals of X_T - X_0 against the Gaussian with covariance T Sigma."""
    D = np.asarray(D, dtype=float)
    d = D.shape[1]
    fig, axes = plt.subplots(1, d, figsize=(4 * d, 3.2))
    for i, ax in enumerate(np.atleast_1d(axes)):
        ax.hist(D[:, i], bins=60, density=True, alpha=0.6, label="MC")
        s = np.sqrt(T * sigma[i][i])
        x = np.linspace(D[:, i].min(), D[:, i].max(), 300)
        ax.plot(x, stats.norm.pdf(x, 0, s), "k-", lw=1, label=f"N(0, T*{sigma[i][i]:.3g})")
        ax.set_xlabel(f"x{i + 1}")
        ax.legend(fontsize=7)
    return _save(fig, path)


def sample_paths(paths, path):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for p in paths:
        sites = np.vstack([p.start, p.sites]) if len(p.sites) else np.atleast_2d(p.start)
        ax.plot(sites[:, 0], sites[:, 1], lw=0.6, drawstyle="steps-post")
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return _save(fig, path)


def sublinearity(profile, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    n = np.asarray(profile["n"], float)
    for key, lab in (("max_profile", "max |chi| / n"), ("norm_profile", "l11 norm / n^(d+1)")):
        v = np.asarray(profile[key], float)
        if np.all(v > 0):
            ax.loglog(n, v, "o-", label=f"{lab} (slope {profile['slopes'][key.split('_')[0]]:.2f})")
    ax.set_xlabel("n")
    ax.legend(fontsize=7)
    return _save(fig, path)


def ks_pvalues(rows, path, alpha):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    labels = [f"{r['test'][:4]} t={r['t']:g} v={np.round(r['v'], 2).tolist()}" for r in rows]
    ax.bar(range(len(rows)), [r["p_holm"] for r in rows])
    ax.axhline(alpha, color="r", lw=1)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("Holm-adjusted p")
    return _save(fig, path)


def ratio_histogram(records, path):
    """Distribution of lhs/rhs per check (values <= 1 mean the inequality holds)."""
    by = {}
    for r in records:
        v = r.get("ratio")
        if isinstance(v, (int, float)) and np.isfinite(v) and v > 0:
            by.setdefault(r["check"], []).append(v)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = sorted(by)
    if names:
        ax.boxplot([np.log10(by[k]) for k in names], showfliers=False)
        ax.set_xticks(range(1, len(names) + 1))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("log10 ratio")
    return _save(fig, path)


def field_heatmap(field, path, title=""):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(np.asarray(field).T, origin="lower", cmap="RdBu_r")
    fig.colorbar(im, ax=ax)
    ax.set_title(title, fontsize=8)
    return _save(fig, path)


def weight_scatter(T, w, k_T, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    o = np.argsort(T)
    ax.semilogy(np.asarray(T)[o], np.asarray(w)[o], ".", ms=2, label="w_0(e)")
    ax.semilogy(np.asarray(T)[o], np.asarray(k_T)[o], "k-", lw=1, label="k(T_e)")
    ax.set_xlabel("T_e")
    ax.legend(fontsize=7)
    return _save(fig, path)


def moment_bars(rows, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    x = np.arange(len(rows))
    ax.bar(x - 0.2, [r["lhs"] for r in rows], 0.4, yerr=[r["lhs_se"] for r in rows], label="E T^(q+1)")
    rhs = [r["rhs"] if np.isfinite(r["rhs"]) else np.nan for r in rows]
    ax.bar(x + 0.2, rhs, 0.4, label="(E a^-q)^((q+1)/q)")
    ax.set_xticks(x)
    ax.set_xticklabels([f"q={r['q']}" for r in rows])
    ax.legend(fontsize=7)
    return _save(fig, path)


def ladder(rungs, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    k = [r["k"] for r in rungs]
    ax.plot(k, [r["lhs"] for r in rungs], "o-", label="lhs norm")
    ax.plot(k, [r["rhs_norm"] for r in rungs], "s--", label="rhs norm")
    ax.set_xlabel("k")
    ax.legend(fontsize=7)
    return _save(fig, path)
