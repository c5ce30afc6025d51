"""Truncated-box grids and the finite-difference operator ``-Delta_h + V``.

Nodes are vertex centred with the Dirichlet boundary nodes eliminated:
``x_i = -L + i*h`` for ``i = 1..n`` and ``h = 2L/(n+1)``. Multi-dimensional
nodes are ordered lexicographically in ``(i_1, ..., i_d)`` (C order, last
axis fastest), so the axis-``j`` neighbour of node ``k`` is ``k + n**(d-1-j)``.

The operator keeps its nonzero lower diagonals only, keyed by offset:
``offsets = (0, n**(d-1), ..., n, 1)`` for grid operators, or ``0..b`` for
general banded matrices. :meth:`DiscreteOperator.lower_band` expands this to
the LAPACK lower band layout ``ab[k, j] = A[j + k, j]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .potential import DimensionError, NegativePotentialError, SampledPotential

MAX_BAND_ENTRIES = 2e8
MAX_SIDE_3D = 48


@dataclass(frozen=True)
class Grid:
    dimension: int
    half_width: float
    nodes_per_side: int
    margin_fraction: float = 0.0
    max_band_entries: float = MAX_BAND_ENTRIES

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if int(self.nodes_per_side) != self.nodes_per_side or self.nodes_per_side < 3:
            raise ValueError(f"nodes_per_side must be an integer >= 3, got {self.nodes_per_side}")
        if not 0.0 <= self.margin_fraction <= 0.45:
            raise ValueError(f"margin_fraction must lie in [0, 0.45], got {self.margin_fraction}")
        if self.dimension == 3 and self.nodes_per_side > MAX_SIDE_3D:
            raise ValueError(f"3D grids are limited to {MAX_SIDE_3D} nodes per side")
        if (self.bandwidth + 1) * self.num_nodes > self.max_band_entries:
            raise MemoryError(
                f"band storage of {(self.bandwidth + 1) * self.num_nodes:.3g} entries exceeds "
                f"the cap {self.max_band_entries:.3g}")
        if self.interior_slice()[0].stop <= self.interior_slice()[0].start:
            raise ValueError("interior subdomain is empty")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.nodes_per_side + 1)

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(1, self.nodes_per_side + 1)

    @property
    def shape(self) -> tuple:
        return (self.nodes_per_side,) * self.dimension

    @property
    def num_nodes(self) -> int:
        return self.nodes_per_side ** self.dimension

    @property
    def bandwidth(self) -> int:
        return self.nodes_per_side ** (self.dimension - 1)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(num_nodes, d)``, lexicographic order."""
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def interior_slice(self) -> tuple:
        """Per-axis index slice of nodes at distance >= ``margin*2L`` from the boundary."""
        h = self.spacing
        i = np.arange(1, self.nodes_per_side + 1)
        dist = np.minimum(i, self.nodes_per_side + 1 - i) * h
        thr = self.margin_fraction * 2.0 * self.half_width
        keep = np.nonzero(dist >= thr - 1e-12 * self.half_width)[0]
        if keep.size == 0:
            return (slice(0, 0),) * self.dimension
        return (slice(int(keep[0]), int(keep[-1]) + 1),) * self.dimension

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.interior_slice()] = True
        return mask.reshape(-1)

    def interior_axis(self) -> np.ndarray:
        return self.axis[self.interior_slice()[0]]

    def refined(self) -> Grid:
        """Same box, spacing halved."""
        return Grid(self.dimension, self.half_width, 2 * self.nodes_per_side + 1,
                    self.margin_fraction, self.max_band_entries)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "half_width": self.half_width,
                "nodes_per_side": self.nodes_per_side, "margin_fraction": self.margin_fraction}


def build_grid(dimension: int, half_width: float, nodes_per_side: int,
               margin_fraction: float = 0.0, max_band_entries: float = MAX_BAND_ENTRIES) -> Grid:
    return Grid(int(dimension), float(half_width), int(nodes_per_side), float(margin_fraction),
                max_band_entries)


@dataclass
class ScalarField:
    """One value per grid node (``u``, ``1/u`` or node-sampled ``V``)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.grid.num_nodes:
            raise ValueError(f"field has {self.values.size} values for {self.grid.num_nodes} nodes")

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def interior(self) -> np.ndarray:
        """Values on the margin-restricted interior, shaped as a d-dimensional array."""
        return self.as_array()[self.grid.interior_slice()]

    def interior_coordinates(self) -> np.ndarray:
        ax = self.grid.interior_axis()
        mesh = np.meshgrid(*([ax] * self.grid.dimension), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def stats(self, full_box: bool = False) -> dict:
        v = self.values if full_box else self.interior().reshape(-1)
        h = self.grid.spacing
        return {"min": float(v.min()), "max": float(v.max()),
                "integral": float(v.sum() * h ** self.grid.dimension)}


def restrict_interior(f: ScalarField) -> np.ndarray:
    if f.grid.margin_fraction >= 0.5:
        raise ValueError("margin_fraction must be below 0.5")
    out = f.interior()
    if out.size == 0:
        raise ValueError("interior subdomain is empty")
    return out


class DiscreteOperator:
    """Symmetric banded matrix stored as its nonzero lower diagonals."""

    def __init__(self, diagonals: dict, grid: Grid | None = None, potential_values=None):
        if 0 not in diagonals:
            raise ValueError("main diagonal missing")
        self.order = int(np.asarray(diagonals[0]).size)
        self.diagonals = {}
        for k, v in sorted(diagonals.items()):
            v = np.ascontiguousarray(v, dtype=float)
            if v.size != self.order - k:
                raise ValueError(f"diagonal {k} has length {v.size}, expected {self.order - k}")
            v.setflags(write=False)
            self.diagonals[int(k)] = v
        self.bandwidth = max(self.diagonals)
        self.grid = grid
        self.potential_values = potential_values

    @classmethod
    def from_lower_band(cls, ab) -> DiscreteOperator:
        ab = np.asarray(ab, dtype=float)
        n = ab.shape[1]
        return cls({k: ab[k, : n - k] for k in range(ab.shape[0])})

    @classmethod
    def from_dense(cls, a, bandwidth: int | None = None) -> DiscreteOperator:
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        if bandwidth is None:
            nz = np.nonzero(np.tril(a))
            bandwidth = int((nz[0] - nz[1]).max()) if nz[0].size else 0
        return cls({k: np.diagonal(a, -k).copy() for k in range(bandwidth + 1)})

    @property
    def diagonal(self) -> np.ndarray:
        return self.diagonals[0]

    def norm_inf(self) -> float:
        row = np.abs(self.diagonals[0]).copy()
        for k, v in self.diagonals.items():
            if k:
                row[k:] += np.abs(v)
                row[:-k] += np.abs(v)
        return float(row.max())

    def lower_band(self) -> np.ndarray:
        ab = np.zeros((self.bandwidth + 1, self.order))
        for k, v in self.diagonals.items():
            ab[k, : self.order - k] = v
        return ab

    def to_sparse(self) -> sp.csc_matrix:
        offs, data = [], []
        for k, v in self.diagonals.items():
            offs.append(-k)
            data.append(v)
            if k:
                offs.append(k)
                data.append(v)
        return sp.diags(data, offs, shape=(self.order, self.order), format="csc")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diagonals[0] * x
        for k, v in self.diagonals.items():
            if k:
                y[k:] += v * x[:-k]
                y[:-k] += v * x[k:]
        return y


def node_potential(potential, grid: Grid) -> np.ndarray:
    """Potential values at the nodes; ``None`` stands for ``V = 0``."""
    if potential is None:
        return np.zeros(grid.num_nodes)
    if potential.dimension != grid.dimension:
        raise DimensionError(
            f"potential dimension {potential.dimension} != grid dimension {grid.dimension}")
    if isinstance(potential, SampledPotential):
        if potential.grid == grid:
            vals = potential.values.copy()
        else:
            vals = np.asarray(potential(grid.coordinates()), dtype=float)
    else:
        vals = np.asarray(potential(grid.coordinates()), dtype=float).reshape(-1)
    if np.any(vals < 0):
        i = int(np.argmin(vals))
        raise NegativePotentialError(f"negative potential {vals[i]:.6g} at node {i}")
    return vals


def assemble(potential, grid: Grid) -> DiscreteOperator:
    """Second-order (3/5/7-point) stencil with Dirichlet elimination."""
    vals = node_potential(potential, grid)
    d, n, h = grid.dimension, grid.nodes_per_side, grid.spacing
    N = grid.num_nodes
    inv_h2 = 1.0 / (h * h)
    diagonals = {0: 2.0 * d * inv_h2 + vals}
    idx = np.arange(N).reshape(grid.shape)
    for j in range(d):
        off = n ** (d - 1 - j)
        # neighbour exists unless the node sits on the last layer along axis j
        has = np.take(idx, np.arange(n - 1), axis=j).reshape(-1)
        band = np.zeros(N - off)
        band[has] = -inv_h2
        diagonals[off] = band
    return DiscreteOperator(diagonals, grid, vals)


def laplacian_eigenvalues_1d(n: int, h: float) -> np.ndarray:
    """Exact eigenvalues ``2(1 - cos(k pi/(n+1)))/h^2`` of the 1D Dirichlet difference Laplacian."""
    k = np.arange(1, n + 1)
    return 2.0 * (1.0 - np.cos(k * np.pi / (n + 1))) / h ** 2
