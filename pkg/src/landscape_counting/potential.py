"""Potentials, ball averages and the two maximal functions.

Polynomials are stored as ``{alpha: coeff}`` with ``alpha`` a tuple of
nonnegative exponents. Ball integrals of polynomials are exact: the
polynomial is re-expanded about the ball centre and integrated term by term
with the closed-form ball moments (odd moments vanish).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gammaln
from scipy.stats import qmc

MultiIndex = tuple  # tuple[int, ...]


class DimensionError(ValueError):
    pass


class NegativePotentialError(ValueError):
    pass


class DomainError(ValueError):
    """A point or ball leaves the region where a sampled potential is known."""


class BracketError(RuntimeError):
    """No radius bracketing the maximal-function constraint was found."""


def order(alpha: Sequence[int]) -> int:
    return int(sum(alpha))


def _check_alpha(alpha, dim=None) -> tuple:
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"negative exponent in multi-index {alpha}")
    if dim is not None and len(alpha) != dim:
        raise DimensionError(f"multi-index {alpha} has length {len(alpha)}, expected {dim}")
    return alpha


def ball_moment(alpha: Sequence[int], radius: float) -> float:
    """Integral of ``y**alpha`` over the centred ball of the given radius."""
    alpha = tuple(alpha)
    if any(a % 2 for a in alpha):
        return 0.0
    d = len(alpha)
    k = sum(alpha)
    log_kappa = (math.log(2.0) + sum(gammaln((a + 1) / 2.0) for a in alpha)
                 - gammaln((k + d) / 2.0) - math.log(k + d))
    return math.exp(log_kappa) * radius ** (k + d)


def ball_volume(dim: int, radius: float) -> float:
    return ball_moment((0,) * dim, radius)


class Polynomial:
    """Signed real polynomial in ``dimension`` variables.

    Used directly for derivatives, which may change sign. Nonnegative
    potentials are :class:`PolynomialPotential`.
    """

    def __init__(self, terms: Mapping[Iterable[int], float], dimension: int | None = None):
        clean: dict[tuple, float] = {}
        for alpha, c in terms.items():
            alpha = tuple(alpha)
            if dimension is None:
                dimension = len(alpha)
            alpha = _check_alpha(alpha, dimension)
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        if dimension is None:
            raise ValueError("dimension is required for an empty polynomial")
        self.dimension = int(dimension)
        self.terms = {a: c for a, c in sorted(clean.items()) if c != 0.0}
        self.total_degree = max((order(a) for a in self.terms), default=0)

    def __repr__(self):
        return f"{type(self).__name__}({self.terms!r}, dimension={self.dimension})"

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __hash__(self):
        return hash((self.dimension, tuple(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dimension:
            if self.dimension == 1:
                x = x[..., None]
            else:
                raise DimensionError(
                    f"point has dimension {x.shape[-1]}, potential has {self.dimension}")
        return x

    def __call__(self, x) -> np.ndarray | float:
        """Evaluate at a point (shape ``(d,)``) or a batch ``(..., d)``."""
        scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and np.shape(x)[0] == self.dimension)
        pts = self._points(x)
        out = np.zeros(pts.shape[:-1])
        for alpha, c in self.terms.items():
            t = np.full(pts.shape[:-1], c)
            for j, a in enumerate(alpha):
                if a:
                    t = t * pts[..., j] ** a
            out = out + t
        return float(out.reshape(-1)[0]) if scalar else out

    def partial_derivative(self, axis: int) -> Polynomial:
        if not 0 <= axis < self.dimension:
            raise ValueError(f"axis {axis} out of range for dimension {self.dimension}")
        new: dict[tuple, float] = {}
        for alpha, c in self.terms.items():
            a = alpha[axis]
            if a == 0:
                continue
            beta = alpha[:axis] + (a - 1,) + alpha[axis + 1:]
            new[beta] = new.get(beta, 0.0) + c * a
        return Polynomial(new, self.dimension)

    def derivative(self, alpha: Sequence[int]) -> Polynomial:
        p: Polynomial = Polynomial(self.terms, self.dimension)
        for axis, a in enumerate(_check_alpha(alpha, self.dimension)):
            for _ in range(a):
                p = p.partial_derivative(axis)
        return p

    def recentred(self, center) -> dict[tuple, float]:
        """Coefficients ``b_beta`` with ``p(center + y) = sum b_beta y**beta``."""
        center = np.asarray(center, dtype=float).reshape(self.dimension)
        out: dict[tuple, float] = {}
        for alpha, c in self.terms.items():
            per_axis = []
            for j, a in enumerate(alpha):
                per_axis.append([(k, math.comb(a, k) * center[j] ** (a - k)) for k in range(a + 1)])
            for combo in itertools.product(*per_axis):
                beta = tuple(k for k, _ in combo)
                w = c
                for _, f in combo:
                    w *= f
                out[beta] = out.get(beta, 0.0) + w
        return out

    def all_derivatives_at(self, x) -> dict[tuple, float]:
        """``{alpha: d^alpha p(x)}`` for every alpha with ``|alpha| <= total_degree``."""
        b = self.recentred(x)
        result = {}
        for alpha in multi_indices(self.dimension, self.total_degree):
            fact = math.prod(math.factorial(a) for a in alpha)
            result[alpha] = fact * b.get(alpha, 0.0)
        return result

    def lifted(self, extra_dims: int) -> Polynomial:
        return Polynomial({a + (0,) * extra_dims: c for a, c in self.terms.items()},
                          self.dimension + extra_dims)


def multi_indices(dim: int, max_order: int):
    """All multi-indices of length ``dim`` with order at most ``max_order``."""
    for k in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(dim), k):
            alpha = [0] * dim
            for j in combo:
                alpha[j] += 1
            yield tuple(alpha)


class PolynomialPotential(Polynomial):
    """Nonnegative polynomial potential ``V``.

    Nonnegativity is probed, not proven: ``probe_count`` Halton points in
    ``[-probe_box, probe_box]^d`` are evaluated and a negative value raises
    :class:`NegativePotentialError`.
    """

    def __init__(self, terms, dimension=None, *, probe_box: float = 10.0,
                 probe_count: int = 10_000, check: bool = True):
        super().__init__(terms, dimension)
        if self.dimension not in (1, 2, 3):
            raise DimensionError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.is_zero():
            raise ValueError("potential must not vanish identically")
        self.probe_box = float(probe_box)
        if check:
            self._probe_nonnegative(probe_count)

    def _probe_nonnegative(self, count):
        sampler = qmc.Halton(d=self.dimension, scramble=False)
        pts = sampler.random(count) * 2 * self.probe_box - self.probe_box
        pts = np.vstack([pts, np.zeros((1, self.dimension))])
        vals = self(pts)
        scale = max(abs(c) for c in self.terms.values())
        bad = np.nonzero(vals < -1e-12 * scale)[0]
        if bad.size:
            i = bad[0]
            raise NegativePotentialError(
                f"potential is negative at {pts[i].tolist()} (value {vals[i]:.6g})")

    def lifted(self, extra_dims: int) -> PolynomialPotential:
        return PolynomialPotential(super().lifted(extra_dims).terms, self.dimension + extra_dims,
                                   probe_box=self.probe_box, check=False)

    def scaled(self, lam: float) -> PolynomialPotential:
        """``V_lam(x) = lam**2 V(lam x)``."""
        return PolynomialPotential({a: c * lam ** (2 + order(a)) for a, c in self.terms.items()},
                                   self.dimension, probe_box=self.probe_box, check=False)

    def radial_profile(self, center) -> np.ndarray:
        """Coefficients ``a_k`` with ``ball_integral(center, r) = sum_k a_k r**(k+d)``."""
        b = self.recentred(center)
        a = np.zeros(self.total_degree + 1)
        for beta, c in b.items():
            if any(x % 2 for x in beta):
                continue
            a[order(beta)] += c * ball_moment(beta, 1.0)
        return a

    def ball_integral(self, center, radius) -> float | np.ndarray:
        r = np.asarray(radius, dtype=float)
        if np.any(r <= 0):
            raise ValueError("radius must be positive")
        a = self.radial_profile(center)
        d = self.dimension
        out = sum(ak * r ** (k + d) for k, ak in enumerate(a))
        return float(out) if np.ndim(out) == 0 else out


# builtin names accepted by :func:`make_potential`
def harmonic(dim: int) -> PolynomialPotential:
    terms = {}
    for j in range(dim):
        alpha = [0] * dim
        alpha[j] = 2
        terms[tuple(alpha)] = 1.0
    return PolynomialPotential(terms, dim)


def simon() -> PolynomialPotential:
    return PolynomialPotential({(2, 2): 1.0}, 2)


def constant(value: float, dim: int) -> PolynomialPotential:
    return PolynomialPotential({(0,) * dim: float(value)}, dim)


def make_potential(spec, dim: int | None = None) -> PolynomialPotential:
    """Build a polynomial potential from a builtin name or a literal.

    ``spec`` is ``"harmonic"``, ``"simon"``, ``"const:<c>"`` or a list of
    ``{"coeff": c, "alpha": [...]}`` records.
    """
    if isinstance(spec, str):
        if spec == "harmonic":
            if dim is None:
                raise ValueError("'harmonic' needs a dimension")
            return harmonic(dim)
        if spec == "simon":
            if dim not in (None, 2):
                raise DimensionError("the 'simon' potential x^2 y^2 is two-dimensional")
            return simon()
        if spec.startswith("const:"):
            if dim is None:
                raise ValueError("'const:<c>' needs a dimension")
            return constant(float(spec.split(":", 1)[1]), dim)
        raise ValueError(f"unknown builtin potential {spec!r}")
    terms = {}
    for rec in spec:
        alpha = tuple(int(a) for a in rec["alpha"])
        terms[alpha] = terms.get(alpha, 0.0) + float(rec["coeff"])
    p = PolynomialPotential(terms, dim)
    return p


def polynomial_literal(poly: Polynomial) -> list[dict]:
    return [{"coeff": c, "alpha": list(a)} for a, c in poly.terms.items()]


class SampledPotential:
    """Nonnegative potential given by node values on a :class:`~landscape_counting.discretize.Grid`.

    Point evaluation is multilinear interpolation between nodes; ball
    integrals use the node cells (side ``h``) as a midpoint rule, with cells
    cut by the sphere weighted by the fraction of ``subsamples**d``
    sub-points that fall inside.
    """

    def __init__(self, grid, values, subsamples: int = 8):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != grid.num_nodes:
            raise ValueError(f"{values.size} values for {grid.num_nodes} nodes")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise NegativePotentialError("sampled potential must be finite and nonnegative")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.dimension = grid.dimension
        self.subsamples = int(subsamples)
        axis = grid.axis
        self._interp = RegularGridInterpolator((axis,) * self.dimension,
                                               values.reshape(grid.shape), method="linear")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim <= 1 and x.size == self.dimension
        pts = x.reshape(-1, self.dimension)
        lo, hi = self.grid.axis[0], self.grid.axis[-1]
        if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
            raise DomainError("point outside the sampled domain")
        out = self._interp(np.clip(pts, lo, hi))
        return float(out[0]) if scalar else out.reshape(x.shape[:-1] if x.ndim > 1 else (-1,))

    def ball_integral(self, center, radius) -> float:
        radius = float(radius)
        if radius <= 0:
            raise ValueError("radius must be positive")
        center = np.asarray(center, dtype=float).reshape(self.dimension)
        g = self.grid
        h = g.spacing
        axis = g.axis
        lo, hi = axis[0] - h / 2, axis[-1] + h / 2
        if np.any(center - radius < lo - 1e-12) or np.any(center + radius > hi + 1e-12):
            raise DomainError("ball exits the sampled domain")
        # candidate cells along each axis
        idx = []
        for j in range(self.dimension):
            i0 = max(int(np.floor((center[j] - radius - axis[0]) / h)) - 1, 0)
            i1 = min(int(np.ceil((center[j] + radius - axis[0]) / h)) + 2, g.nodes_per_side)
            idx.append(np.arange(i0, i1))
        mesh = np.meshgrid(*[axis[i] for i in idx], indexing="ij")
        rel = np.stack([m - c for m, c in zip(mesh, center)], axis=-1)
        # nearest / farthest point of each cell from the centre
        near = np.maximum(np.abs(rel) - h / 2, 0.0)
        far = np.abs(rel) + h / 2
        inside = (far ** 2).sum(-1) <= radius ** 2
        cut = ~inside & ((near ** 2).sum(-1) < radius ** 2)
        frac = inside.astype(float)
        if np.any(cut):
            s = self.subsamples
            offs = (np.arange(s) + 0.5) / s * h - h / 2
            sub = np.stack(np.meshgrid(*([offs] * self.dimension), indexing="ij"), -1).reshape(-1, self.dimension)
            cr = rel[cut]
            d2 = ((cr[:, None, :] + sub[None, :, :]) ** 2).sum(-1)
            frac[cut] = (d2 <= radius ** 2).mean(axis=1)
        vals = self.values.reshape(g.shape)[np.ix_(*idx)]
        return float((vals * frac).sum() * h ** self.dimension)

    def lifted(self, extra_dims: int) -> SampledPotential:
        from .discretize import Grid
        g = self.grid
        new_dim = g.dimension + extra_dims
        if new_dim > 3:
            raise DimensionError("lifted dimension exceeds 3")
        grid = Grid(new_dim, g.half_width, g.nodes_per_side, g.margin_fraction)
        vals = np.broadcast_to(self.values.reshape(g.shape + (1,) * extra_dims), grid.shape)
        return SampledPotential(grid, vals.reshape(-1).copy(), self.subsamples)


def evaluate(potential, point):
    return potential(point)


def partial_derivative(poly: Polynomial, axis: int) -> Polynomial:
    return poly.partial_derivative(axis)


def derivative_vanishes_identically(poly: Polynomial, axis: int) -> bool:
    return poly.partial_derivative(axis).is_zero()


def ball_integral(potential, center, radius):
    return potential.ball_integral(center, radius)


def avg_functional(potential, center, radius):
    """``r**(2-d) * integral of V over B(center, r)``."""
    r = np.asarray(radius, dtype=float)
    return r ** (2 - potential.dimension) * potential.ball_integral(center, radius)


@dataclass(frozen=True)
class MaximalResult:
    m: float
    radius: float
    contiguous: bool


def maximal_m_detail(potential, x, tol: float = 1e-10, r_min: float = 1e-6,
                     r_max: float = 1e6, n_scan: int = 120) -> MaximalResult:
    """Fefferman-Phong-Shen maximal function with diagnostics.

    ``1/m`` is the largest radius on a logarithmic scan at which the scaled
    ball average is at most one, refined by bisection against the next
    (violating) scan radius. ``contiguous`` is False when the feasible scan
    radii do not form an initial segment.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float).reshape(potential.dimension)
    if isinstance(potential, SampledPotential):
        g = potential.grid
        room = float(np.min(np.minimum(x - (g.axis[0] - g.spacing / 2),
                                       (g.axis[-1] + g.spacing / 2) - x)))
        r_max = min(r_max, room * (1 - 1e-12))
        if r_max <= r_min:
            raise BracketError("point too close to the sampled boundary")
        radii = np.geomspace(r_min, r_max, n_scan)
        f = np.array([avg_functional(potential, x, r) for r in radii])
        func = lambda r: avg_functional(potential, x, r)
    else:
        a = potential.radial_profile(x)
        ks = np.arange(a.size) + 2.0
        func = lambda r: float(np.sum(a * r ** ks))
        radii = np.geomspace(r_min, r_max, n_scan)
        f = (a[None, :] * radii[:, None] ** ks[None, :]).sum(axis=1)
    feasible = f <= 1.0
    if not feasible.any():
        raise BracketError(f"scaled average exceeds 1 already at r={r_min:g} (x={x.tolist()})")
    last = int(np.nonzero(feasible)[0][-1])
    if last == len(radii) - 1:
        raise BracketError(f"scaled average stays below 1 up to r={radii[-1]:g} (x={x.tolist()})")
    contiguous = bool(feasible[: last + 1].all())
    lo, hi = radii[last], radii[last + 1]
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if func(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    r_star = 0.5 * (lo + hi)
    return MaximalResult(1.0 / r_star, r_star, contiguous)


def maximal_m(potential, x, tol: float = 1e-10, **scan) -> float:
    return maximal_m_detail(potential, x, tol, **scan).m


def maximal_M(poly: Polynomial, x) -> float:
    """Smith-Zhong function: sum of ``|d^alpha V(x)|**(1/(|alpha|+2))``."""
    derivs = poly.all_derivatives_at(x)
    return float(sum(abs(v) ** (1.0 / (order(a) + 2)) for a, v in derivs.items()))


@dataclass
class MaximalProfile:
    points: np.ndarray
    m: np.ndarray
    M: np.ndarray | None
    contiguous: np.ndarray


def maximal_profile(potential, points, tol: float = 1e-10) -> MaximalProfile:
    pts = np.asarray(points, dtype=float).reshape(-1, potential.dimension)
    res = [maximal_m_detail(potential, p, tol) for p in pts]
    M = None
    if isinstance(potential, Polynomial):
        M = np.array([maximal_M(potential, p) for p in pts])
    return MaximalProfile(pts, np.array([r.m for r in res]), M,
                          np.array([r.contiguous for r in res]))


@dataclass
class ConditionReport:
    kind: str
    constant_estimate: float
    delta: float | None
    worst_case: dict
    samples: int
    ratios: np.ndarray = field(repr=False, default=None)

    @property
    def satisfied_with(self) -> float:
        return max(self.constant_estimate, 1.0)


def kato_samples(dim: int, count: int, box: float = 10.0, r_range=(1e-2, 1e2),
                 seed: int = 0):
    """Random centres in ``[-box, box]^d`` and log-uniform pairs ``r < R``."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box, box, size=(count, dim))
    lr = np.log(r_range)
    a = np.exp(rng.uniform(*lr, size=count))
    b = np.exp(rng.uniform(*lr, size=count))
    r, R = np.minimum(a, b), np.maximum(a, b)
    R = np.where(R <= r, r * 2.0, R)
    return centers, np.stack([r, R], axis=1)


def doubling_samples(dim: int, count: int, box: float = 10.0, r_range=(1e-2, 1e2), seed: int = 0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box, box, size=(count, dim))
    radii = np.exp(rng.uniform(*np.log(r_range), size=count))
    return centers, radii


def check_condition(potential, kind: str, centers, radii, delta: float | None = None) -> ConditionReport:
    """Estimate the Kato constant ``C_K`` or the doubling constant ``C_D``.

    For ``kind="kato"`` ``radii`` is an array of ``(r, R)`` pairs with
    ``0 < r < R`` and ``delta`` is required for sampled potentials (it
    defaults to 2 for polynomials). For ``kind="doubling"`` ``radii`` is an
    array of radii ``r``.
    """
    kind = kind.lower()
    centers = np.asarray(centers, dtype=float).reshape(-1, potential.dimension)
    radii = np.asarray(radii, dtype=float)
    if centers.shape[0] == 0:
        raise ValueError("empty sample set")
    d = potential.dimension
    if kind == "kato":
        if delta is None:
            if not isinstance(potential, Polynomial):
                raise ValueError("delta is required for sampled potentials")
            delta = 2.0
        if delta <= 0:
            raise ValueError("delta must be positive")
        radii = radii.reshape(-1, 2)
        if radii.shape[0] != centers.shape[0]:
            raise ValueError("one (r, R) pair per centre is required")
        if np.any(radii[:, 0] <= 0) or np.any(radii[:, 1] <= radii[:, 0]):
            raise ValueError("degenerate radii: need 0 < r < R")
        e = d - 2 + delta
        ratios = np.empty(len(centers))
        for i, (x, (r, R)) in enumerate(zip(centers, radii)):
            small = r ** -e * potential.ball_integral(x, r)
            big = R ** -e * potential.ball_integral(x, R)
            ratios[i] = small / big if big > 0 else (np.inf if small > 0 else 1.0)
        i = int(np.argmax(ratios))
        worst = {"x": centers[i].tolist(), "r": float(radii[i, 0]), "R": float(radii[i, 1])}
    elif kind == "doubling":
        radii = radii.reshape(-1)
        if radii.shape[0] != centers.shape[0]:
            raise ValueError("one radius per centre is required")
        if np.any(radii <= 0):
            raise ValueError("degenerate radii: need r > 0")
        ratios = np.empty(len(centers))
        for i, (x, r) in enumerate(zip(centers, radii)):
            ratios[i] = potential.ball_integral(x, 2 * r) / (potential.ball_integral(x, r) + r ** (d - 2))
        i = int(np.argmax(ratios))
        worst = {"x": centers[i].tolist(), "r": float(radii[i])}
        delta = None
    else:
        raise ValueError(f"unknown condition kind {kind!r}")
    return ConditionReport(kind, float(ratios[i]), delta, worst, len(centers), ratios)


def lift_potential(potential, extra_dims: int):
    """Cylindrical extension ``V~(x, t) = V(x)``."""
    if extra_dims < 1:
        raise ValueError("extra_dims must be at least 1")
    if potential.dimension + extra_dims > 3:
        raise DimensionError("lifted dimension exceeds 3")
    return potential.lifted(extra_dims)
