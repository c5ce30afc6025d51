"""Landscape function ``(-Delta_h + V) u = 1`` on the Dirichlet box."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla
from scipy import ndimage

from .discretize import DiscreteOperator, Grid, ScalarField, assemble

RESIDUAL_TOL = 1e-10
# above this many band entries the sparse direct factorization is used
BANDED_CHOLESKY_LIMIT = 2e7


class LandscapeError(RuntimeError):
    pass


class Factorization:
    """Cholesky factor of a positive definite operator, reusable across right-hand sides.

    Banded Cholesky (LAPACK ``pbtrf``) for moderate band storage, a sparse
    direct factorization with a symmetric fill-reducing ordering otherwise.
    """

    def __init__(self, op: DiscreteOperator, method: str = "auto"):
        self.op = op
        if method == "auto":
            method = "banded" if (op.bandwidth + 1) * op.order <= BANDED_CHOLESKY_LIMIT else "sparse"
        t0 = time.perf_counter()
        if method == "banded":
            try:
                self._cb = la.cholesky_banded(op.lower_band(), lower=True)
            except la.LinAlgError as exc:
                raise LandscapeError(f"Cholesky breakdown, operator not positive definite: {exc}")
        elif method == "sparse":
            try:
                self._lu = sla.splu(op.to_sparse(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                    options={"SymmetricMode": True})
            except RuntimeError as exc:
                raise LandscapeError(f"factorization breakdown: {exc}")
            piv = self._lu.U.diagonal()
            if not np.array_equal(self._lu.perm_r, self._lu.perm_c) or np.any(piv <= 0):
                raise LandscapeError("operator is not positive definite")
        else:
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.factor_time = time.perf_counter() - t0

    def _raw_solve(self, b):
        if self.method == "banded":
            return la.cho_solve_banded((self._cb, True), b)
        return self._lu.solve(b)

    def solve(self, b, refine: int = 2):
        """Solve with up to ``refine`` steps of iterative refinement."""
        b = np.asarray(b, dtype=float)
        x = self._raw_solve(b)
        scale = max(np.max(np.abs(b)), 1e-300)
        for _ in range(refine):
            r = b - self.op.matvec(x)
            if np.max(np.abs(r)) / scale <= 1e-14:
                break
            x = x + self._raw_solve(r)
        res = float(np.max(np.abs(b - self.op.matvec(x))) / scale)
        return x, res


@dataclass
class LandscapeSolution:
    u: ScalarField
    rhs_kind: str = "full"
    radius: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.u.grid


def indicator_rhs(grid: Grid, radius: float) -> np.ndarray:
    r2 = (grid.coordinates() ** 2).sum(axis=1)
    return (r2 <= radius * radius).astype(float)


def _solve_checked(fac: Factorization, grid: Grid, rhs, kind, radius) -> LandscapeSolution:
    t0 = time.perf_counter()
    u, res = fac.solve(rhs)
    if res > RESIDUAL_TOL:
        raise LandscapeError(f"residual {res:.3g} exceeds {RESIDUAL_TOL:g}")
    support = rhs > 0
    if kind == "full" and np.any(u <= 0):
        raise LandscapeError(f"nonpositive landscape value {u.min():.3g}")
    if kind == "indicator" and np.any(u[support] <= 0):
        raise LandscapeError("nonpositive landscape value on the indicator support")
    stats = {"factorization_time": fac.factor_time, "solve_time": time.perf_counter() - t0,
             "residual": res, "method": fac.method}
    return LandscapeSolution(ScalarField(grid, u), kind, radius, stats)


def solve_landscape(op: DiscreteOperator, rhs="full", method: str = "auto",
                    factorization: Factorization | None = None) -> LandscapeSolution:
    """Solve ``A u = 1`` (``rhs="full"``) or ``A u = 1_{B(0, L)}`` (``rhs=L``).

    Aborts with :class:`LandscapeError` when the factorization breaks down,
    the relative residual exceeds ``1e-10`` or ``u`` is not positive.
    """
    if op.grid is None:
        raise ValueError("operator has no grid")
    fac = factorization or Factorization(op, method)
    if isinstance(rhs, str):
        if rhs != "full":
            raise ValueError(f"unknown rhs kind {rhs!r}")
        return _solve_checked(fac, op.grid, np.ones(op.order), "full", None)
    radius = float(rhs)
    if radius <= 0:
        raise ValueError("indicator radius must be positive")
    return _solve_checked(fac, op.grid, indicator_rhs(op.grid, radius), "indicator", radius)


def landscape_sequence(potential, grid: Grid, radii, method: str = "auto"):
    """Indicator solutions ``u_L`` for increasing ``L``, one shared factorization."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    op = assemble(potential, grid)
    fac = Factorization(op, method)
    return [solve_landscape(op, r, factorization=fac) for r in radii]


def landscape(potential, grid: Grid, method: str = "auto") -> LandscapeSolution:
    return solve_landscape(assemble(potential, grid), "full", method)


def effective_potential(sol: LandscapeSolution) -> ScalarField:
    u = sol.u.values
    if np.any(u <= 0):
        raise LandscapeError("effective potential needs a positive landscape function")
    return ScalarField(sol.grid, 1.0 / u)


@dataclass
class HarnackReport:
    C_H_estimate: float
    samples: int
    worst_pair: tuple
    skipped: int = 0
    clipped: int = 0


def harnack_constant(sol: LandscapeSolution, closure: bool = True, min_nodes: int = 4,
                     sample: int | None = None, seed: int = 0) -> HarnackReport:
    """Oscillation of ``u`` over the cubes ``Q(x, 2 sqrt(u(x)))``.

    For every interior node ``x`` (or ``sample`` random ones) the estimate is
    ``max_Q u / min_Q u`` with ``Q`` centred at ``x``, half side ``sqrt(u(x))``
    and clipped to the interior. With ``closure`` the half side is enlarged by
    ``h``: this covers every node whose cell meets a cube centred anywhere in
    the cell of ``x``, which is the essential sup/inf of the piecewise
    constant field. Cubes with fewer than ``min_nodes`` nodes are skipped.
    """
    g = sol.grid
    h = g.spacing
    u = sol.u.interior()
    shape = u.shape
    d = g.dimension
    half = np.sqrt(u) + (h if closure else 0.0)
    k = np.floor(half / h * (1 + 1e-12)).astype(np.int64)
    k = np.minimum(k, max(shape))
    centre_idx = np.indices(shape).reshape(d, -1).T
    if sample is not None and sample < centre_idx.shape[0]:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(centre_idx.shape[0], size=sample, replace=False))
    else:
        chosen = np.arange(centre_idx.shape[0])
    kflat = k.reshape(-1)
    ratio = np.full(kflat.size, np.nan)
    argmax_pos = np.zeros(kflat.size, dtype=np.int64)
    for kk in np.unique(kflat[chosen]):
        sel = chosen[kflat[chosen] == kk]
        size = 2 * int(kk) + 1
        # nearest-mode padding repeats edge values, which leaves max/min over the clipped cube unchanged
        mx = ndimage.maximum_filter(u, size=size, mode="nearest").reshape(-1)
        mn = ndimage.minimum_filter(u, size=size, mode="nearest").reshape(-1)
        ratio[sel] = mx[sel] / mn[sel]
    counts = np.ones(kflat.size, dtype=np.int64)
    clipped = np.zeros(kflat.size, dtype=bool)
    for j in range(d):
        c = centre_idx[:, j]
        lo = np.maximum(c - kflat, 0)
        hi = np.minimum(c + kflat, shape[j] - 1)
        counts *= hi - lo + 1
        clipped |= (c - kflat < 0) | (c + kflat > shape[j] - 1)
    valid = np.zeros(kflat.size, dtype=bool)
    valid[chosen] = counts[chosen] >= min_nodes
    skipped = int(chosen.size - valid.sum())
    if not valid.any():
        raise LandscapeError("every Harnack cube has fewer than min_nodes grid nodes")
    i = int(np.nanargmax(np.where(valid, ratio, np.nan)))
    coords = sol.u.interior_coordinates()
    # locate the extremal partner of the worst centre
    kk = int(kflat[i])
    c = centre_idx[i]
    win = tuple(slice(max(cj - kk, 0), min(cj + kk, s - 1) + 1) for cj, s in zip(c, shape))
    block = u[win]
    jmin = np.unravel_index(np.argmin(block), block.shape)
    partner = np.array([w.start + j for w, j in zip(win, jmin)])
    partner_flat = np.ravel_multi_index(tuple(partner), shape)
    est = max(float(ratio[i]), 1.0)
    return HarnackReport(est, int(valid.sum()), (coords[i].tolist(), coords[partner_flat].tolist()),
                         skipped, int((clipped & valid).sum()))
