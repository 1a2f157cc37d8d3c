"""Lattice geometry on Z^d: boxes, edge sets, discrete calculus, isoperimetry."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np


def _check_dim(d):
    if d < 2:
        raise ValueError(f"dimension d={d} not supported (d >= 2 required)")


@dataclass(frozen=True)
class Box:
    """Axis-parallel box of lattice sites, lo <= x <= hi componentwise."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have equal length")
        _check_dim(len(lo))
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def __len__(self):
        return self.size

    def sites(self):
        """All sites as an (|B|, d) int array, row-major (last axis fastest)."""
        grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts))
        return np.all((pts >= np.array(self.lo)) & (pts <= np.array(self.hi)), axis=1)

    def index(self, pts):
        """Row-major index of each point, -1 for points outside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        rel = pts - np.array(self.lo)
        inside = self.contains(pts)
        idx = np.ravel_multi_index(tuple(np.where(inside[:, None], rel, 0).T), self.shape)
        return np.where(inside, idx, -1)

    def grow(self, k=1):
        return Box(tuple(a - k for a in self.lo), tuple(b + k for b in self.hi))

    def translate(self, v):
        return Box(tuple(a + int(s) for a, s in zip(self.lo, v)), tuple(b + int(s) for b, s in zip(self.hi, v)))


def box(n, d):
    """B_n = [-n, n]^d intersected with Z^d; real n is floored."""
    _check_dim(d)
    if n < 0:
        raise ValueError("radius must be nonnegative")
    m = int(np.floor(n))
    return Box((-m,) * d, (m,) * d)


def cube(corner, n):
    """Translate of [0, n]^d to the given corner."""
    corner = tuple(int(c) for c in corner)
    return Box(corner, tuple(c + n for c in corner))


@dataclass(frozen=True, order=True)
class Edge:
    """Unordered nearest-neighbour edge; x is the lexicographically smaller endpoint."""

    x: tuple
    y: tuple

    def __post_init__(self):
        x = tuple(int(v) for v in self.x)
        y = tuple(int(v) for v in self.y)
        if len(x) != len(y):
            raise ValueError("endpoints of different dimension")
        if sum(abs(a - b) for a, b in zip(x, y)) != 1:
            raise ValueError(f"{x} and {y} are not nearest neighbours")
        if y < x:
            x, y = y, x
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_base(cls, x, axis):
        x = tuple(int(v) for v in x)
        y = list(x)
        y[axis] += 1
        return cls(x, tuple(y))

    @property
    def axis(self):
        return next(i for i, (a, b) in enumerate(zip(self.x, self.y)) if a != b)

    @property
    def d(self):
        return len(self.x)


class EdgeArray:
    """Vectorized edge list: edge i joins base[i] and base[i] + e_{axis[i]}."""

    def __init__(self, base, axis):
        self.base = np.asarray(base, dtype=np.int64).reshape(-1, np.shape(base)[-1])
        self.axis = np.asarray(axis, dtype=np.int64).reshape(-1)
        if len(self.base) != len(self.axis):
            raise ValueError("base and axis length mismatch")

    @property
    def d(self):
        return self.base.shape[1]

    @property
    def tip(self):
        t = self.base.copy()
        t[np.arange(len(t)), self.axis] += 1
        return t

    def __len__(self):
        return len(self.axis)

    def __iter__(self):
        for b, i in zip(self.base, self.axis):
            yield Edge.from_base(b, int(i))

    def edges(self):
        return list(self)

    @classmethod
    def from_edges(cls, edges: Iterable[Edge]):
        edges = list(edges)
        if not edges:
            raise ValueError("empty edge list")
        return cls(np.array([e.x for e in edges]), np.array([e.axis for e in edges]))


def _unit(d, i):
    v = np.zeros(d, dtype=np.int64)
    v[i] = 1
    return v


def edge_set(domain, both=False):
    """Edges with at least one endpoint in the domain (both endpoints if both=True).

    domain is a Box or an (m, d) array of distinct sites. Order: by axis, then by
    row-major base site, so the result is deterministic.
    """
    sites = domain.sites() if isinstance(domain, Box) else np.unique(np.atleast_2d(np.asarray(domain, dtype=np.int64)), axis=0)
    if len(sites) == 0:
        raise ValueError("empty domain")
    d = sites.shape[1]
    _check_dim(d)
    bases, axes = [], []
    key = _site_keys(sites)
    for i in range(d):
        e = _unit(d, i)
        cand = np.concatenate([sites, sites - e])
        cand = np.unique(cand, axis=0)
        in_x = np.isin(_site_keys(cand), key)
        in_y = np.isin(_site_keys(cand + e), key)
        keep = (in_x & in_y) if both else (in_x | in_y)
        bases.append(cand[keep])
        axes.append(np.full(int(keep.sum()), i))
    return EdgeArray(np.concatenate(bases), np.concatenate(axes))


def _site_keys(pts):
    pts = np.ascontiguousarray(np.asarray(pts, dtype=np.int64))
    return pts.view(np.dtype((np.void, pts.dtype.itemsize * pts.shape[1]))).ravel()


def _lookup(f, site):
    key = tuple(int(v) for v in site)
    try:
        if isinstance(f, Mapping):
            return f[key]
        return f(key)
    except KeyError:
        raise ValueError(f"site function has no value at {key}") from None


def gradient(f, e: Edge):
    """f(y_e) - f(x_e); f is a mapping or callable on site tuples."""
    return _lookup(f, e.y) - _lookup(f, e.x)


def edge_average(f, e: Edge):
    return 0.5 * (_lookup(f, e.x) + _lookup(f, e.y))


def field_on(values, box: Box, pts):
    """Evaluate a box field (row-major array) at points, zero outside the box."""
    vals = np.asarray(values)
    idx = box.index(pts)
    out = np.zeros(idx.shape + vals.shape[1:], dtype=vals.dtype)
    inside = idx >= 0
    out[inside] = vals[idx[inside]]
    return out


def grad_edges(values, box: Box, edges: EdgeArray):
    """Gradient along each edge of a field stored on a box, extended by zero."""
    return field_on(values, box, edges.tip) - field_on(values, box, edges.base)


def av_edges(values, box: Box, edges: EdgeArray):
    return 0.5 * (field_on(values, box, edges.tip) + field_on(values, box, edges.base))


def boundary_size(sites, ambient: Box | None = None):
    """Number of edges with exactly one endpoint in the site set.

    With an ambient box only edges with both endpoints in the box count.
    """
    sites = np.unique(np.atleast_2d(np.asarray(sites, dtype=np.int64)), axis=0)
    d = sites.shape[1]
    key = _site_keys(sites)
    count = 0
    for i in range(d):
        for sgn in (1, -1):
            nb = sites + sgn * _unit(d, i)
            out = ~np.isin(_site_keys(nb), key)
            if ambient is not None:
                out &= ambient.contains(nb)
            count += int(out.sum())
    return count


def isoperimetric_ratio(sites, ambient: Box | None = None):
    """|L|^{(d-1)/d} / |boundary of L|; infinite when the boundary is empty."""
    sites = np.unique(np.atleast_2d(np.asarray(sites, dtype=np.int64)), axis=0)
    if len(sites) == 0:
        raise ValueError("empty site set")
    d = sites.shape[1]
    nb = boundary_size(sites, ambient)
    if nb == 0:
        return float("inf")
    return len(sites) ** ((d - 1) / d) / nb


def product_rule_residual(g, h, e: Edge):
    """grad(gh) - av(g) grad(h) - av(h) grad(g) on one edge (zero up to rounding)."""
    gh = lambda x: _lookup(g, x) * _lookup(h, x)
    return gradient(gh, e) - edge_average(g, e) * gradient(h, e) - edge_average(h, e) * gradient(g, e)


def sites_dict(values, box: Box) -> dict:
    return {tuple(int(v) for v in s): float(x) for s, x in zip(box.sites(), np.asarray(values))}


SiteFunction = Callable[[tuple], float]
