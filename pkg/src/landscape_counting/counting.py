"""Sublevel-set volumes and coarse-grained box counts of a node field.

A node field is read as piecewise constant on the node cells
``[x_i - h/2, x_i + h/2]^d``. The box partition of side ``mu**-1/2`` is
anchored at ``anchor`` and only boxes lying inside the union of interior
cells are used. A box's ess-inf / ess-sup are the min / max over the nodes
whose cells overlap it with positive measure. With this reading the
relations ``n(mu) l^d <= V_U(mu) <= N(mu) l^d`` hold exactly, where ``V_U`` is
the sublevel volume inside the tiled union ``U`` of counted boxes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import ScalarField

RESOLUTION_CELLS = 3
REL_TOL = 1e-12
OVERLAP_TOL = 1e-9


class ResolutionError(ValueError):
    pass


@dataclass
class BoxPartition:
    sidelength: float
    anchor: np.ndarray
    first: np.ndarray  # first counted box index per axis
    count: np.ndarray  # number of counted boxes per axis

    @property
    def boxes_total(self) -> int:
        return int(np.prod(self.count))

    def edges(self, axis: int) -> np.ndarray:
        k = self.first[axis] + np.arange(self.count[axis] + 1)
        return self.anchor[axis] + k * self.sidelength


@dataclass
class CountRow:
    mu: float
    volume: float
    N: int
    n: int
    boxes_total: int


def sublevel_volume(f: ScalarField, mu: float, full_box: bool = False) -> float:
    """``h^d * #{interior nodes with value <= mu}``."""
    v = f.values if full_box else f.interior()
    return float(np.count_nonzero(v <= mu)) * f.grid.spacing ** f.grid.dimension


def sublevel_volumes(f: ScalarField, mus, full_box: bool = False) -> np.ndarray:
    """Vectorised :func:`sublevel_volume` over many thresholds."""
    v = np.sort((f.values if full_box else f.interior()).reshape(-1))
    cnt = np.searchsorted(v, np.asarray(mus, dtype=float), side="right")
    return cnt * f.grid.spacing ** f.grid.dimension


def partition(f: ScalarField, mu: float, anchor=None) -> BoxPartition:
    d = f.grid.dimension
    ell = float(mu) ** -0.5
    anchor = np.zeros(d) if anchor is None else np.asarray(anchor, dtype=float).reshape(d)
    ax = f.grid.interior_axis()
    h = f.grid.spacing
    lo, hi = ax[0] - h / 2, ax[-1] + h / 2
    first, count = [], []
    for j in range(d):
        slack = REL_TOL * max(abs(lo), abs(hi), ell)
        k0 = math.ceil((lo - anchor[j] - slack) / ell)
        k1 = math.floor((hi - anchor[j] + slack) / ell)
        first.append(k0)
        count.append(max(k1 - k0, 0))
    return BoxPartition(ell, anchor, np.array(first), np.array(count))


def _overlaps(ax, h, edges):
    """``w[k, i]``: length of cell ``i`` inside box ``k``, shape (boxes, nodes)."""
    lo = np.maximum(ax[None, :] - h / 2, edges[:-1, None])
    hi = np.minimum(ax[None, :] + h / 2, edges[1:, None])
    return np.maximum(hi - lo, 0.0)


def _box_extrema(values, ax, h, part: BoxPartition):
    """Per-box min and max over overlapping nodes (separable along axes)."""
    mn = values
    mx = values
    for j in range(values.ndim):
        # overlaps below OVERLAP_TOL*h are rounding slivers of shared cell faces
        w = _overlaps(ax, h, part.edges(j)) > OVERLAP_TOL * h
        mn_j, mx_j = [], []
        for k in range(w.shape[0]):
            idx = np.nonzero(w[k])[0]
            sl = slice(idx[0], idx[-1] + 1)
            mn_j.append(np.take(mn, np.arange(sl.start, sl.stop), axis=j).min(axis=j))
            mx_j.append(np.take(mx, np.arange(sl.start, sl.stop), axis=j).max(axis=j))
        mn = np.stack(mn_j, axis=j)
        mx = np.stack(mx_j, axis=j)
    return mn, mx


def _check_resolution(f: ScalarField, mu: float):
    ell = mu ** -0.5
    if ell < RESOLUTION_CELLS * f.grid.spacing * (1 - 1e-12):
        raise ResolutionError(
            f"box side {ell:.4g} at mu={mu:g} is below {RESOLUTION_CELLS} grid spacings "
            f"({RESOLUTION_CELLS * f.grid.spacing:.4g})")


@dataclass
class CoarseCounts:
    mu: float
    N: int
    n: int
    boxes_total: int
    tiled_volume: float  # sublevel volume inside the counted boxes
    partition: BoxPartition = field(repr=False)


def coarse_counts(f: ScalarField, mu: float, anchor=None, check_resolution: bool = True) -> CoarseCounts:
    """Counts of partition boxes with node-min (``N``) and node-max (``n``) ``<= mu``."""
    mu = float(mu)
    if mu <= 0:
        raise ValueError("mu must be positive")
    if check_resolution:
        _check_resolution(f, mu)
    part = partition(f, mu, anchor)
    vals = f.interior()
    ax = f.grid.interior_axis()
    h = f.grid.spacing
    if part.boxes_total == 0:
        return CoarseCounts(mu, 0, 0, 0, 0.0, part)
    mn, mx = _box_extrema(vals, ax, h, part)
    # volume of the sublevel set inside the union of counted boxes
    weights = None
    for j in range(vals.ndim):
        e = part.edges(j)
        wj = np.clip(np.minimum(ax + h / 2, e[-1]) - np.maximum(ax - h / 2, e[0]), 0.0, h)
        shape = [1] * vals.ndim
        shape[j] = -1
        wj = wj.reshape(shape)
        weights = wj if weights is None else weights * wj
    tiled = float(np.sum(np.where(vals <= mu, weights, 0.0)))
    return CoarseCounts(mu, int(np.count_nonzero(mn <= mu)), int(np.count_nonzero(mx <= mu)),
                        part.boxes_total, tiled, part)


@dataclass
class ChainResult:
    mu: float
    C_H: float
    n: int
    N: int
    n_CH: int
    n_CH_same_partition: int
    scaled_volume: float  # mu^(d/2) * tiled sublevel volume
    scaled_volume_linear: float  # mu * tiled sublevel volume (undimensioned variant)
    volume: float
    holds: tuple  # (n <= mu^(d/2) V, mu^(d/2) V <= N, N <= n(C_H mu))
    slacks: tuple
    resolution_ok: bool = True  # box side >= 3h at mu
    resolution_ok_CH: bool = True  # same at C_H mu

    @property
    def ok(self) -> bool:
        return all(self.holds)


def _leq(a, b) -> bool:
    return a <= b + REL_TOL * max(abs(a), abs(b), 1.0)


def chain_check(f: ScalarField, mu: float, C_H: float, anchor=None) -> ChainResult:
    """Check ``n(mu) <= mu^(d/2) V(mu) <= N(mu) <= n(C_H mu)``.

    The volume is measured inside the counted boxes (partial boxes at the
    interior edge are excluded from every term). Real comparisons allow a
    relative rounding slack of ``1e-12``. Failures are returned, not raised.
    ``n_CH_same_partition`` counts boxes of the ``mu`` partition whose max is
    at most ``C_H mu``. The inequalities hold for the cell reading at any box
    size, so the resolution guard is recorded rather than enforced.
    """
    if C_H < 1:
        raise ValueError("C_H must be >= 1")
    d = f.grid.dimension
    cc = coarse_counts(f, mu, anchor, check_resolution=False)
    res = []
    for m in (mu, C_H * mu):
        try:
            _check_resolution(f, m)
            res.append(True)
        except ResolutionError:
            res.append(False)
    hi = coarse_counts(f, C_H * mu, anchor, check_resolution=False)
    part = cc.partition
    if part.boxes_total:
        _, mx = _box_extrema(f.interior(), f.grid.interior_axis(), f.grid.spacing, part)
        same = int(np.count_nonzero(mx <= C_H * mu))
    else:
        same = 0
    sv = mu ** (d / 2) * cc.tiled_volume
    holds = (_leq(cc.n, sv), _leq(sv, cc.N), cc.N <= hi.n)
    slacks = (sv - cc.n, cc.N - sv, hi.n - cc.N)
    return ChainResult(float(mu), float(C_H), cc.n, cc.N, hi.n, same, sv, mu * cc.tiled_volume,
                       sublevel_volume(f, mu), holds, slacks, res[0], res[1])


def count_rows(f: ScalarField, mus, anchor=None, check_resolution: bool = True) -> list[CountRow]:
    rows = []
    for mu in mus:
        cc = coarse_counts(f, mu, anchor, check_resolution)
        rows.append(CountRow(float(mu), sublevel_volume(f, mu), cc.N, cc.n, cc.boxes_total))
    return rows
