"""Exact eigenvalue counts by matrix inertia.

The number of eigenvalues ``<= mu`` of a symmetric ``A`` equals the number
of negative pivots of a root-free factorization ``A - mu I = L D L^T``
(Sylvester's law of inertia). Two factorization backends are available:

``banded``
    Column-oriented banded LDL^T without pivoting (compiled with numba).
    Cost ``O(N b^2)``.
``sparse``
    SuperLU applied to ``P (A - mu I) P^T`` where ``P`` is a symmetric
    fill-reducing ordering computed once per operator, with natural column
    order, symmetric mode and diagonal pivot threshold zero. Without row
    interchanges this is ``L U`` with ``U = D L^T``, a congruence, so the signs
    of ``diag(U)`` give the inertia. Any row interchange is treated as a
    breakdown.

Near-zero pivots (``|d| < 1e-12 ||A||_inf``) trigger a deterministic retry
at ``mu + 1e-10 ||A||_inf * retry`` for ``retry = 1, 2, 3``. Shifting up
keeps eigenvalues sitting on ``mu`` inside the count, matching the closed
interval ``(-inf, mu]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from numba import njit

from .discretize import DiscreteOperator

PIVOT_RTOL = 1e-12
SHIFT_RTOL = 1e-10
MAX_RETRIES = 3
DENSE_LIMIT = 2500
BANDED_WORK_LIMIT = 3e8


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InertiaResult:
    mu: float
    count: int
    pivot_min_abs: float
    retries: int
    method: str = "banded"


@njit(cache=True)
def _band_ldl_negatives(t, mu, tiny):
    """LDL^T of ``A - mu I`` in place on ``t[j, o] = A[j + o, j]``.

    Returns ``(negatives, min_abs_pivot, ok)``; ``ok`` is False as soon as a
    pivot below ``tiny`` in magnitude appears.
    """
    n, w = t.shape
    b = w - 1
    for j in range(n):
        t[j, 0] -= mu
    neg = 0
    pmin = np.inf
    l = np.empty(w)
    for k in range(n):
        dk = t[k, 0]
        a = abs(dk)
        if a < pmin:
            pmin = a
        if a < tiny or not np.isfinite(dk):
            return neg, pmin, False
        if dk < 0.0:
            neg += 1
        m = min(b, n - 1 - k)
        for i in range(1, m + 1):
            l[i] = t[k, i] / dk
        for s in range(1, m + 1):
            ts = t[k, s]
            if ts == 0.0:
                continue
            row = k + s
            for i in range(s, m + 1):
                if l[i] != 0.0:
                    t[row, i - s] -= l[i] * ts
    return neg, pmin, True


@njit(cache=True)
def _sturm_negatives(diag, off, mu, tiny):
    n = diag.size
    neg = 0
    pmin = np.inf
    d = diag[0] - mu
    for k in range(n):
        if k > 0:
            e = off[k - 1]
            d = (diag[k] - mu) - (e / d) * e
        a = abs(d)
        if a < pmin:
            pmin = a
        if a < tiny or not np.isfinite(d):
            return neg, pmin, False
        if d < 0.0:
            neg += 1
    return neg, pmin, True


def _transposed_band(op: DiscreteOperator) -> np.ndarray:
    t = np.zeros((op.order, op.bandwidth + 1))
    for k, v in op.diagonals.items():
        t[: op.order - k, k] = v
    return t


class _SparseShifted:
    """``A`` permuted once by a symmetric fill-reducing ordering, factored per shift."""

    def __init__(self, op: DiscreteOperator):
        a = op.to_sparse()
        n = a.shape[0]
        # ordering from a factorization of A itself (positive definite for V >= 0)
        perm = sla.splu(a, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                        options={"SymmetricMode": True}).perm_c
        inv = np.empty_like(perm)
        inv[perm] = np.arange(n)
        self.a = a[inv][:, inv].tocsc()
        self.eye = sp.identity(n, format="csc")
        self.natural = np.arange(n)

    def __call__(self, mu, tiny):
        try:
            lu = sla.splu((self.a - mu * self.eye).tocsc(), permc_spec="NATURAL",
                          diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        except RuntimeError:
            return 0, 0.0, False
        if not (np.array_equal(lu.perm_r, self.natural) and np.array_equal(lu.perm_c, self.natural)):
            return 0, 0.0, False
        piv = lu.U.diagonal()
        pmin = float(np.min(np.abs(piv)))
        if pmin < tiny or not np.all(np.isfinite(piv)):
            return 0, pmin, False
        return int(np.count_nonzero(piv < 0)), pmin, True


def choose_method(op: DiscreteOperator) -> str:
    if op.bandwidth <= 1 or op.order * op.bandwidth ** 2 <= BANDED_WORK_LIMIT:
        return "banded"
    return "sparse"


def _with_retries(kernel, op, mu, method):
    norm = op.norm_inf()
    tiny = PIVOT_RTOL * norm
    pmin = 0.0
    for retry in range(MAX_RETRIES + 1):
        shift = mu + SHIFT_RTOL * norm * retry
        neg, pmin, ok = kernel(shift, tiny)
        if ok:
            return InertiaResult(float(mu), int(neg), float(pmin), retry, method)
    raise FactorizationError(
        f"inertia factorization broke down at mu={mu!r} after {MAX_RETRIES} shifted retries "
        f"(smallest pivot {pmin:.3g}); mu sits on an eigenvalue cluster")


def _kernel(op: DiscreteOperator, method: str):
    if method == "auto":
        method = choose_method(op)
    if method == "banded":
        base = _transposed_band(op)
        return (lambda s, tiny: _band_ldl_negatives(base.copy(), s, tiny)), method
    if method == "sparse":
        return _SparseShifted(op), method
    if method == "sturm":
        if op.bandwidth > 1:
            raise ValueError("sturm_count needs a tridiagonal (1D) operator")
        diag = np.ascontiguousarray(op.diagonals[0])
        off = np.ascontiguousarray(op.diagonals.get(1, np.zeros(op.order - 1)))
        return (lambda s, tiny: _sturm_negatives(diag, off, s, tiny)), method
    raise ValueError(f"unknown method {method!r}")


def counter(op: DiscreteOperator, method: str = "auto"):
    """``mu -> InertiaResult`` with the method setup (band copy, ordering) done once."""
    kernel, method = _kernel(op, method)
    return lambda mu: _with_retries(kernel, op, float(mu), method)


def inertia_count(op: DiscreteOperator, mu: float, method: str = "auto") -> InertiaResult:
    """Number of eigenvalues ``<= mu`` from the negative pivots of ``A - mu I``."""
    if method == "sturm":
        raise ValueError("use sturm_count for the tridiagonal recurrence")
    return counter(op, method)(mu)


def sturm_count(op: DiscreteOperator, mu: float) -> InertiaResult:
    """Tridiagonal fast path; identical arithmetic to the banded factorization."""
    return counter(op, "sturm")(mu)


def count_sweep(op: DiscreteOperator, mu_grid, method: str = "auto") -> list[InertiaResult]:
    mus = np.asarray(mu_grid, dtype=float).reshape(-1)
    if mus.size > 1 and np.any(np.diff(mus) <= 0):
        raise ValueError("mu_grid must be strictly increasing")
    count = counter(op, method)
    out = [count(m) for m in mus]
    counts = [r.count for r in out]
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise FactorizationError(f"eigenvalue counts decrease along the sweep: {counts}")
    return out


def dense_eigs(op: DiscreteOperator) -> np.ndarray:
    if op.order > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to N <= {DENSE_LIMIT}, got {op.order}")
    return la.eigvalsh(op.to_dense())


def gershgorin_lower(op: DiscreteOperator) -> float:
    rad = np.zeros(op.order)
    for k, v in op.diagonals.items():
        if k:
            rad[k:] += np.abs(v)
            rad[:-k] += np.abs(v)
    return float(np.min(op.diagonals[0] - rad))


def ground_state_bracket(op: DiscreteOperator, rtol: float = 1e-6, method: str = "auto",
                         bounds=None):
    """Bracket ``(lo, hi)`` of the smallest eigenvalue by bisection on counts.

    ``count(lo) == 0`` and ``count(hi) >= 1``. Optional starting ``bounds`` are
    checked and replaced by Gershgorin / diagonal bounds when they fail.
    """
    result = counter(op, method)
    count = lambda m: result(m).count
    lo = gershgorin_lower(op)
    lo = lo - 1e-9 * max(abs(lo), 1.0)
    hi = float(np.min(op.diagonals[0]))
    if bounds is not None:
        blo, bhi = (float(b) for b in bounds)
        if blo > lo and count(blo) == 0:
            lo = blo
        if lo < bhi < hi and count(bhi) >= 1:
            hi = bhi
    while count(hi) == 0:
        hi = hi + max(abs(hi), 1.0)
    while hi - lo > rtol * max(abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        if count(mid) >= 1:
            hi = mid
        else:
            lo = mid
    return lo, hi
