"""Empirical checks of the eigenvalue-counting bounds and the landscape equivalences."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import counting, spectra
from .discretize import Grid, ScalarField, assemble, build_grid
from .landscape import (LandscapeSolution, effective_potential, harnack_constant, landscape,
                        solve_landscape)
from .potential import (Polynomial, derivative_vanishes_identically, lift_potential, maximal_M,
                        maximal_m, maximal_m_detail)


@dataclass
class SandwichReport:
    d: int
    mu_grid: list
    counts: list
    c_est: float | None
    C_est: float | None
    rows: list  # per mu: mu, count, vol_c (V(c mu)), vol_C (V(C mu)), lower, upper
    lower_holds: bool
    upper_holds: bool
    adequate: bool | None = None
    findings: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return (self.c_est is not None and self.C_est is not None and self.lower_holds
                and self.upper_holds and self.c_est <= 1.0 <= self.C_est)


def _constant_grid(lo, hi, per_decade):
    decades = math.log10(hi / lo)
    return np.geomspace(lo, hi, int(round(per_decade * decades)) + 1)


def sandwich_constants(counts, volume_curve, d: int, mu_grid, c_range=(1e-3, 1.0),
                       C_range=(1.0, 1e3), per_decade: int = 200) -> SandwichReport:
    """Largest ``c`` and smallest ``C`` on a log grid with

    ``(c mu)^(d/2) V(c mu) <= count(mu) <= (C mu)^(d/2) V(C mu)`` for every grid ``mu``.

    ``volume_curve`` maps an array of thresholds to sublevel volumes. Both
    sides are monotone in the constant, so a scan finds the extremal value;
    when no grid value works the constant is ``None`` and a finding is logged.
    """
    mus = np.asarray(mu_grid, dtype=float)
    cnt = np.asarray(counts, dtype=float)
    cs = _constant_grid(*c_range, per_decade)
    Cs = _constant_grid(*C_range, per_decade)

    def scaled(k):
        arg = np.outer(k, mus)
        return arg ** (d / 2) * np.asarray(volume_curve(arg.ravel())).reshape(arg.shape)

    lower_ok = np.all(scaled(cs) <= cnt[None, :], axis=1)
    upper_ok = np.all(cnt[None, :] <= scaled(Cs), axis=1)
    findings = []
    c_est = float(cs[np.nonzero(lower_ok)[0][-1]]) if lower_ok.any() else None
    C_est = float(Cs[np.nonzero(upper_ok)[0][0]]) if upper_ok.any() else None
    if c_est is None:
        findings.append(f"lower bound violated for every c in [{c_range[0]:g}, {c_range[1]:g}]")
    if C_est is None:
        findings.append(f"upper bound violated for every C in [{C_range[0]:g}, {C_range[1]:g}]")
    rows = []
    lower_holds = upper_holds = True
    for mu, k in zip(mus, cnt):
        row = {"mu": float(mu), "count": int(k)}
        if c_est is not None:
            row["vol_c"] = float(volume_curve(np.array([c_est * mu]))[0])
            row["lower"] = float((c_est * mu) ** (d / 2) * row["vol_c"])
            lower_holds &= row["lower"] <= k
        if C_est is not None:
            row["vol_C"] = float(volume_curve(np.array([C_est * mu]))[0])
            row["upper"] = float((C_est * mu) ** (d / 2) * row["vol_C"])
            upper_holds &= k <= row["upper"]
        rows.append(row)
    return SandwichReport(d, mus.tolist(), [int(k) for k in cnt], c_est, C_est, rows,
                          bool(lower_holds and c_est is not None),
                          bool(upper_holds and C_est is not None), None, findings)


def domain_adequate(W: ScalarField, threshold: float) -> bool:
    """True when ``{W <= threshold}`` contains interior nodes only."""
    inside = W.grid.interior_mask()
    return not np.any((W.values <= threshold) & ~inside)


def landscape_bounds(op, sol: LandscapeSolution):
    """``1/max u <= lambda_1 <= <u, A u>/<u, u> = sum u / sum u^2``."""
    u = sol.u.values
    return 1.0 / float(u.max()), float(u.sum() / (u * u).sum())


def default_mu_grid(op, count: int = 20, decades: float = 1.0, method: str = "auto",
                    bounds=None):
    """``count`` log-spaced energies from the ground state over ``decades`` decades."""
    _, hi = spectra.ground_state_bracket(op, rtol=1e-4, method=method, bounds=bounds)
    return np.geomspace(hi, hi * 10 ** decades, count)


@dataclass
class VerifyResult:
    sandwich: SandwichReport
    harnack: dict
    chain: list
    lemmas: dict
    landscape_stats: dict
    timings: dict
    solution: LandscapeSolution | None = field(default=None, repr=False)

    @property
    def chain_ok(self) -> bool:
        return all(c["holds"][0] and c["holds"][1] and c["holds"][2] for c in self.chain)


def _chain_dict(r: counting.ChainResult) -> dict:
    return {"mu": r.mu, "C_H": r.C_H, "n": r.n, "N": r.N, "n_CH": r.n_CH,
            "n_CH_same_partition": r.n_CH_same_partition,
            "scaled_volume": r.scaled_volume, "scaled_volume_linear": r.scaled_volume_linear,
            "volume": r.volume, "holds": list(r.holds), "slacks": [float(s) for s in r.slacks],
            "resolution_ok": r.resolution_ok, "resolution_ok_CH": r.resolution_ok_CH}


def run_verify(potential, grid: Grid, mu_grid=None, n_mu: int = 20, decades: float = 1.0,
               method: str = "auto", lemma_checks: bool = True, anchor=None,
               harnack_sample: int | None = None, seed: int = 0) -> VerifyResult:
    """Full pipeline: landscape, effective potential, exact counts, sandwich constants,
    Harnack constant and the chain of coarse-count inequalities."""
    t = {}
    t0 = time.perf_counter()
    op = assemble(potential, grid)
    sol = solve_landscape(op, "full")
    W = effective_potential(sol)
    t["landscape"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mus = np.asarray(mu_grid, dtype=float) if mu_grid is not None else \
        default_mu_grid(op, n_mu, decades, method, landscape_bounds(op, sol))
    counts = [r.count for r in spectra.count_sweep(op, mus, method)]
    t["counts"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    vol = lambda x: counting.sublevel_volumes(W, x)
    rep = sandwich_constants(counts, vol, grid.dimension, mus)
    if rep.C_est is not None:
        rep.adequate = domain_adequate(W, rep.C_est * float(mus[-1]))
        if not rep.adequate:
            rep.findings.append("sublevel set at C_est*mu_max reaches the margin layer; enlarge the box")
    har = harnack_constant(sol, sample=harnack_sample, seed=seed)
    chain = [_chain_dict(counting.chain_check(W, m, har.C_H_estimate, anchor)) for m in mus]
    t["analysis"] = time.perf_counter() - t0

    lemmas = {}
    if lemma_checks:
        t0 = time.perf_counter()
        d = grid.dimension
        C_up = max(2.0, 2.0 * d / math.pi ** 2) * (1 + 1e-3)
        C_low = (1 + (4 * har.C_H_estimate) ** 2) * (1 + 1e-3)
        N_up = [counting.coarse_counts(W, C_up * m, anchor, check_resolution=False).N for m in mus]
        n_mu_ = [counting.coarse_counts(W, m, anchor, check_resolution=False).n for m in mus]
        cnt_low = [r.count for r in spectra.count_sweep(op, C_low * mus, method)]
        lemmas = {
            "upper_C": C_up, "upper_holds": all(k <= N for k, N in zip(counts, N_up)),
            "N_at_upper_C": N_up,
            "lower_C": C_low, "lower_holds": all(n <= k for n, k in zip(n_mu_, cnt_low)),
            "count_at_lower_C": cnt_low,
            # the sandwich constants need not exceed the lemma thresholds; logged only
            "C_est_vs_upper_C": None if rep.C_est is None else rep.C_est <= C_up,
            "c_est_vs_lower_C": None if rep.c_est is None else rep.c_est >= 1.0 / C_low,
        }
        t["lemmas"] = time.perf_counter() - t0
    harnack = {"C_H_estimate": har.C_H_estimate, "samples": har.samples,
               "worst_pair": har.worst_pair, "skipped": har.skipped, "clipped": har.clipped}
    return VerifyResult(rep, harnack, chain, lemmas, sol.stats, t, sol)


def refinement_shift(a: float | None, b: float | None) -> float:
    if a is None or b is None:
        return math.inf
    return abs(b - a) / abs(a)


@dataclass
class EquivalenceReport:
    kind: str
    ratios: np.ndarray = field(repr=False)
    min: float = 0.0
    max: float = 0.0
    spread: float = 1.0
    fitted_exponent: float | None = None
    fitted_constant: float | None = None
    samples: int = 0

    @classmethod
    def from_ratios(cls, kind, ratios, **extra):
        r = np.asarray(ratios, dtype=float)
        if r.size == 0:
            raise ValueError("no samples")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ValueError(f"{kind}: ratios must be finite and positive")
        return cls(kind, r, float(r.min()), float(r.max()), float(r.max() / r.min()),
                   samples=int(r.size), **extra)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "min": self.min, "max": self.max, "spread": self.spread,
                "fitted_exponent": self.fitted_exponent, "fitted_constant": self.fitted_constant,
                "samples": self.samples}


def interior_sample(grid: Grid, count: int | None = 200, seed: int = 0, stride: int = 1):
    """Coordinates of (a random subset of) interior nodes, optionally on every ``stride``-th node."""
    ax = grid.interior_axis()[::stride]
    mesh = np.meshgrid(*([ax] * grid.dimension), indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    if count is not None and count < len(pts):
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(len(pts), size=count, replace=False))]
    return pts


def multiscale_sample(dim: int, count: int, radius: float, r_min: float = 1e-2, seed: int = 0):
    """Points with log-uniform ``|x|`` in ``[r_min, radius]`` and uniform direction.

    Maximal-function ratios vary on the local scale ``1/m``, which is finest
    near the minima of ``V``; a uniform sample of a wide box rarely lands
    there. The first ``k`` points of a call with ``count > k`` equal a call
    with ``count = k``, so doubling a sample keeps the original points.
    """
    if not 0 < r_min < radius:
        raise ValueError("need 0 < r_min < radius")
    rng = np.random.default_rng(seed)
    out = np.empty((count, dim))
    for i in range(count):
        r = np.exp(rng.uniform(np.log(r_min), np.log(radius)))
        v = rng.normal(size=dim)
        out[i] = r * v / np.linalg.norm(v)
    return out


def field_at_nodes(f: ScalarField, points) -> np.ndarray:
    """Values of ``f`` at points that are grid nodes."""
    g = f.grid
    idx = np.rint((np.asarray(points) + g.half_width) / g.spacing).astype(int) - 1
    if np.any(idx < 0) or np.any(idx >= g.nodes_per_side):
        raise ValueError("point outside the grid")
    off = np.abs(-g.half_width + (idx + 1) * g.spacing - points)
    if np.any(off > 1e-9 * g.half_width):
        raise ValueError("points must be grid nodes")
    return f.as_array()[tuple(idx.T)]


def equivalence_u_m(sol: LandscapeSolution, potential, points=None, count: int = 200,
                    seed: int = 0) -> EquivalenceReport:
    """Ratios ``u(x) m(x, V)^2`` over interior nodes."""
    if points is None:
        points = interior_sample(sol.grid, count, seed)
    points = np.asarray(points, dtype=float).reshape(-1, sol.grid.dimension)
    if not sol.grid.interior_mask().reshape(sol.grid.shape)[
            tuple((np.rint((points + sol.grid.half_width) / sol.grid.spacing).astype(int) - 1).T)].all():
        raise ValueError("samples must be interior nodes")
    u = field_at_nodes(sol.u, points)
    m = np.array([maximal_m(potential, p) for p in points])
    return EquivalenceReport.from_ratios("u-vs-m", u * m ** 2)


def equivalence_m_M(poly: Polynomial, points) -> EquivalenceReport:
    pts = np.asarray(points, dtype=float).reshape(-1, poly.dimension)
    r = [maximal_m(poly, p) / maximal_M(poly, p) for p in pts]
    return EquivalenceReport.from_ratios("m-vs-M", r)


def equivalence_lift(potential, points, extra_dims: int = 1) -> EquivalenceReport:
    """Ratios ``m((x, 0), V~) / m(x, V)`` for the cylindrical lift ``V~``."""
    lifted = lift_potential(potential, extra_dims)
    pts = np.asarray(points, dtype=float).reshape(-1, potential.dimension)
    r = [maximal_m(lifted, np.concatenate([p, np.zeros(extra_dims)])) / maximal_m(potential, p)
         for p in pts]
    return EquivalenceReport.from_ratios("m-lift", r)


def _pairs(n, count, rng):
    i = rng.integers(0, n, size=count)
    j = rng.integers(0, n, size=count)
    keep = i != j
    return i[keep], j[keep]


def slow_variation(potential, points, seed: int = 0, max_pairs: int = 20000) -> EquivalenceReport:
    """Ratios ``m(y)/m(x)`` over sample pairs with ``|x - y| <= 1/m(x)``.

    Pairs are all close neighbours among ``points`` (and each point with
    itself perturbed to its ``1/m`` sphere along the first axis).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, potential.dimension)
    m = np.array([maximal_m(potential, p) for p in pts])
    ratios = []
    for k, (p, mk) in enumerate(zip(pts, m)):
        q = p.copy()
        q[0] += 1.0 / mk
        ratios.append(maximal_m(potential, q) / mk)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    close = (dist <= 1.0 / m[:, None]) & (dist > 0)
    i, j = np.nonzero(close)
    if i.size > max_pairs:
        sel = np.random.default_rng(seed).choice(i.size, max_pairs, replace=False)
        i, j = i[sel], j[sel]
    ratios.extend((m[j] / m[i]).tolist())
    r = np.asarray(ratios)
    # symmetric band [1/C, C]
    C = float(max(r.max(), 1.0 / r.min()))
    rep = EquivalenceReport.from_ratios("m-slow-variation", r)
    rep.fitted_constant = C
    return rep


def growth_exponent(potential, points, pairs: int = 2000, seed: int = 0) -> EquivalenceReport:
    """Empirical ``k`` with ``m(x) <= C m(y) (1 + |x-y| m(y))^k`` over random pairs.

    ``C`` is the largest ratio among pairs with ``|x-y| m(y) <= 1``; ``k`` the
    smallest exponent covering every other pair with that ``C``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, potential.dimension)
    m = np.array([maximal_m(potential, p) for p in pts])
    rng = np.random.default_rng(seed)
    i, j = _pairs(len(pts), pairs, rng)
    ratio = m[i] / m[j]
    s = np.linalg.norm(pts[i] - pts[j], axis=1) * m[j]
    near = s <= 1.0
    C = float(max(ratio[near].max() if near.any() else 1.0, 1.0))
    far = ~near
    k = 0.0
    if far.any():
        k = float(max(0.0, np.max((np.log(ratio[far]) - math.log(C)) / np.log1p(s[far]))))
    rep = EquivalenceReport.from_ratios("m-growth", ratio)
    rep.fitted_exponent, rep.fitted_constant = k, C
    return rep


def taylor_constant(poly: Polynomial, points, pairs: int = 2000, seed: int = 0) -> EquivalenceReport:
    """Fitted ``C`` in ``M(y) <= C M(x) (1 + |x-y| M(x))^(D/2)`` over random pairs."""
    pts = np.asarray(points, dtype=float).reshape(-1, poly.dimension)
    M = np.array([maximal_M(poly, p) for p in pts])
    rng = np.random.default_rng(seed)
    i, j = _pairs(len(pts), pairs, rng)
    D = poly.total_degree
    bound = M[i] * (1 + np.linalg.norm(pts[i] - pts[j], axis=1) * M[i]) ** (D / 2)
    r = M[j] / bound
    rep = EquivalenceReport.from_ratios("M-taylor", r)
    rep.fitted_constant = float(r.max())
    return rep


def diagnose_discreteness_polynomial(poly: Polynomial) -> bool:
    """True iff no partial derivative of ``poly`` vanishes identically."""
    return not any(derivative_vanishes_identically(poly, j) for j in range(poly.dimension))


@dataclass
class TrendReport:
    radii: list
    values: list
    verdict: str
    consistent: bool
    note: str = "heuristic evidence from finite data, not a proof"


def diagnose_discreteness_numeric(sol: LandscapeSolution, shells) -> TrendReport:
    """Sup of ``u`` over ``{|x| >= R}`` in the interior for increasing ``R``."""
    shells = [float(r) for r in shells]
    if any(b <= a for a, b in zip(shells, shells[1:])):
        raise ValueError("shell radii must be increasing")
    u = sol.u.interior().reshape(-1)
    r = np.linalg.norm(sol.u.interior_coordinates(), axis=1)
    sups = []
    for R in shells:
        sel = r >= R
        if not sel.any():
            raise ValueError(f"shell |x| >= {R} contains no interior node")
        sups.append(float(u[sel].max()))
    decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    ok = bool(decreasing and sups[-1] < 0.5 * sups[0])
    return TrendReport(shells, sups, "consistent with discrete" if ok else "not consistent", ok)


def l1_probe(potential, half_widths, spacing: float, margin_fraction: float = 0.1,
             ratio_threshold: float = 0.9) -> TrendReport:
    """Integral of ``u`` over the interior of nested boxes at fixed spacing.

    The verdict is ``"L1 (form domain)"`` when the increment between the last
    two boxes is at most ``ratio_threshold`` times the previous increment.
    """
    half_widths = [float(L) for L in half_widths]
    if len(half_widths) < 3 or any(b <= a for a, b in zip(half_widths, half_widths[1:])):
        raise ValueError("need at least three nested boxes")
    ints = []
    for L in half_widths:
        n = int(round(2 * L / spacing)) - 1
        g = build_grid(potential.dimension, L, n, margin_fraction)
        ints.append(landscape(potential, g).u.stats()["integral"])
    inc = np.diff(ints)
    ok = bool(inc[-2] > 0 and inc[-1] <= ratio_threshold * inc[-2])
    return TrendReport(half_widths, ints, "L1 (form domain)" if ok else "not L1 at tested scale", ok)
