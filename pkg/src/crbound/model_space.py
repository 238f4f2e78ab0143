"""Sample spaces with a reference measure, and parametric families of densities on them.

Every probability measure handled by the package is written as a density
against a reference measure stored as per-point weights. Continuous sample
spaces are truncated Simpson grids, so every integral becomes a finite
weighted sum over the space's reference points.

Vectorization conventions used throughout the package:

* a parameter point ``p`` is a 1-D array of length ``k``;
* sample points ``X`` are a 2-D array of shape ``(n, d)``;
* ``log_density(p, X)`` returns shape ``(n,)``;
* ``analytic_score(p, X)`` returns shape ``(n, k)``, column ``i`` being the
  partial derivative of the log-likelihood in coordinate ``i``;
* ``sampler(p, rng, size)`` returns shape ``(size, d)``.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import special, stats
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, FamilyError

MAX_EXACT_DIM = 4
MAX_EXACT_POINTS = 1 << 25
NORMALIZATION_TOL = 1e-9
# densities at or below this are treated as zero
TINY_DENSITY = 1e-300

LogDensity = Callable[[np.ndarray, np.ndarray], np.ndarray]
ScoreFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
Sampler = Callable[[np.ndarray, np.random.Generator, int], np.ndarray]


def simpson_weights(n: int, a: float, b: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` equispaced nodes on ``[a, b]``."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd node count >= 3, got {n}")
    if not a < b:
        raise ValueError(f"grid interval must satisfy a < b, got [{a}, {b}]")
    h = (b - a) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def as_points(X, dim: int) -> np.ndarray:
    """Coerce a scalar, a single point or a batch of points to shape ``(n, dim)``."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected sample points of dimension {dim}, got shape {np.shape(X)}")
    return arr


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """A finite stand-in for the sample space together with its reference measure.

    Use the constructors :meth:`discrete`, :meth:`grid` and :meth:`product`
    rather than instantiating directly. Product spaces materialize their
    points lazily so that large products remain usable for Monte Carlo.
    """

    kind: str
    names: tuple[str, ...]
    factors: tuple["SampleSpace", ...] = ()
    interval: Optional[tuple[float, float]] = None
    labels: Optional[tuple[str, ...]] = None
    _points: Optional[np.ndarray] = field(default=None, repr=False)
    _weights: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("discrete", "grid", "product"):
            raise ValueError(f"unknown sample space kind {self.kind!r}")
        if self._weights is not None:
            w = np.asarray(self._weights, dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise FamilyError("reference weights must be finite and strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "_weights", w)
        if self._points is not None:
            pts = np.asarray(self._points, dtype=float)
            pts.setflags(write=False)
            object.__setattr__(self, "_points", pts)

    @classmethod
    def discrete(cls, points: Sequence[float], weights=None, name: str = "x",
                 labels: Optional[Sequence[str]] = None) -> "SampleSpace":
        pts = np.asarray(points, dtype=float).reshape(-1)
        if pts.size == 0:
            raise FamilyError("a discrete sample space needs at least one point")
        if np.unique(pts).size != pts.size:
            raise FamilyError("discrete sample points must be distinct")
        w = np.ones(pts.size) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != pts.shape:
            raise FamilyError("one reference weight per sample point is required")
        return cls("discrete", (name,), labels=None if labels is None else tuple(labels),
                   _points=pts.reshape(-1, 1), _weights=w)

    @classmethod
    def grid(cls, a: float, b: float, n: int = 2001, name: str = "x") -> "SampleSpace":
        try:
            w = simpson_weights(n, a, b)
        except ValueError as exc:
            raise FamilyError(str(exc)) from None
        nodes = np.linspace(a, b, n)
        return cls("grid", (name,), interval=(float(a), float(b)),
                   _points=nodes.reshape(-1, 1), _weights=w)

    @classmethod
    def product(cls, factors: Sequence["SampleSpace"]) -> "SampleSpace":
        factors = tuple(factors)
        if len(factors) < 2:
            raise FamilyError("a product space needs at least two factors")
        dim = sum(f.dim for f in factors)
        names = tuple(f"x{i + 1}" for i in range(dim))
        return cls("product", names, factors=factors)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def size(self) -> int:
        if self._weights is not None:
            return int(self._weights.size)
        return math.prod(f.size for f in self.factors)

    @property
    def admits_exact(self) -> bool:
        return self.dim <= MAX_EXACT_DIM and self.size <= MAX_EXACT_POINTS

    @cached_property
    def points(self) -> np.ndarray:
        if self._points is not None:
            return self._points
        self._require_materializable()
        grids = np.meshgrid(*[np.arange(f.size) for f in self.factors], indexing="ij")
        cols = [f.points[g.reshape(-1)] for f, g in zip(self.factors, grids)]
        pts = np.hstack(cols)
        pts.setflags(write=False)
        return pts

    @cached_property
    def weights(self) -> np.ndarray:
        if self._weights is not None:
            return self._weights
        self._require_materializable()
        w = self.factors[0].weights
        for f in self.factors[1:]:
            w = np.multiply.outer(w, f.weights)
        w = w.reshape(-1)
        w.setflags(write=False)
        return w

    def _require_materializable(self):
        if not self.admits_exact:
            raise FamilyError(
                f"product space of dimension {self.dim} with {self.size} points is too large "
                f"to enumerate (limits: dimension {MAX_EXACT_DIM}, {MAX_EXACT_POINTS} points)")

    def reweighted(self, factor: np.ndarray) -> "SampleSpace":
        """Same points, reference weights multiplied pointwise by ``factor``."""
        factor = np.asarray(factor, dtype=float)
        if factor.shape != (self.size,):
            raise FamilyError("reweighting needs one factor per reference point")
        if not np.all(np.isfinite(factor)) or np.any(factor <= 0):
            raise FamilyError("reweighting factor must be strictly positive")
        return SampleSpace(self.kind, self.names, self.factors, self.interval, self.labels,
                           _points=self.points, _weights=self.weights * factor)


@dataclass(frozen=True, eq=False)
class ParametricFamily:
    """A finite-dimensional family of densities against a sample space's reference measure.

    ``constraint`` narrows the box ``param_domain`` further (the categorical
    simplex). ``reference_point`` is where normalization is checked on
    construction; it defaults to the center of the box.
    """

    name: str
    coordinate_names: tuple[str, ...]
    param_domain: tuple[tuple[float, float], ...]
    space: SampleSpace
    log_density: LogDensity
    analytic_score: Optional[ScoreFn] = None
    sampler: Optional[Sampler] = None
    constraint: Optional[Callable[[np.ndarray], bool]] = None
    reference_point: Optional[tuple[float, ...]] = None
    normalization_tol: float = NORMALIZATION_TOL
    check_normalization: bool = True

    def __post_init__(self):
        names = tuple(self.coordinate_names)
        domain = tuple((float(lo), float(hi)) for lo, hi in self.param_domain)
        object.__setattr__(self, "coordinate_names", names)
        object.__setattr__(self, "param_domain", domain)
        if len(names) == 0:
            raise FamilyError("a family needs at least one coordinate")
        if len(set(names)) != len(names):
            raise FamilyError(f"duplicate coordinate names in {names}")
        if len(domain) != len(names):
            raise FamilyError("one domain interval per coordinate is required")
        for nm, (lo, hi) in zip(names, domain):
            if not lo < hi:
                raise FamilyError(f"empty domain interval ({lo}, {hi}) for coordinate {nm!r}")
        if self.reference_point is None:
            center = tuple(0.5 * (lo + hi) if math.isfinite(lo + hi) else 0.0 for lo, hi in domain)
            object.__setattr__(self, "reference_point", center)
        ref = self.check(self.reference_point)
        if self.check_normalization and self.space.admits_exact:
            total = float(np.sum(self.density(ref, self.space.points) * self.space.weights))
            if abs(total - 1.0) > self.normalization_tol:
                raise FamilyError(
                    f"family {self.name!r} is not normalized at {tuple(ref)}: "
                    f"integral of density = {total!r}")

    @property
    def k(self) -> int:
        return len(self.coordinate_names)

    @property
    def has_analytic_score(self) -> bool:
        return self.analytic_score is not None

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.shape != (self.k,) or not np.all(np.isfinite(p)):
            return False
        for x, (lo, hi) in zip(p, self.param_domain):
            if not lo < x < hi:
                return False
        return self.constraint is None or bool(self.constraint(p))

    def check(self, p) -> np.ndarray:
        """Return ``p`` as a float array, raising :class:`DomainError` if it is outside the domain."""
        arr = np.asarray(p, dtype=float).reshape(-1)
        if arr.shape != (self.k,):
            raise DomainError(f"expected {self.k} parameter values for {self.name!r}, got {arr.size}")
        if not self.contains(arr):
            desc = ", ".join(f"{n}={v!r}" for n, v in zip(self.coordinate_names, arr))
            raise DomainError(f"parameter outside domain of {self.name!r}: {desc}")
        return arr

    def points(self, X) -> np.ndarray:
        return as_points(X, self.space.dim)

    def density(self, p, X) -> np.ndarray:
        p = self.check(p)
        with np.errstate(under="ignore"):
            return np.exp(self.log_density(p, self.points(X)))

    def sample(self, p, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` points; families without a sampler draw reference points by probability."""
        p = self.check(p)
        if self.sampler is not None:
            return as_points(self.sampler(p, rng, size), self.space.dim)
        if not self.space.admits_exact:
            raise FamilyError(f"family {self.name!r} has no sampler and its space cannot be enumerated")
        probs = self.density(p, self.space.points) * self.space.weights
        idx = rng.choice(probs.size, size=size, p=probs / probs.sum())
        return self.space.points[idx]

    def without_analytic_score(self) -> "ParametricFamily":
        """Copy whose scores are computed by finite differences."""
        return dataclasses.replace(self, name=f"{self.name}[fd]", analytic_score=None,
                                   check_normalization=False)

    def point(self, **coords: float) -> np.ndarray:
        """Build a parameter vector from keyword coordinates."""
        missing = set(self.coordinate_names) - set(coords)
        extra = set(coords) - set(self.coordinate_names)
        if missing or extra:
            raise DomainError(f"coordinates must be exactly {self.coordinate_names}")
        return self.check([coords[n] for n in self.coordinate_names])


def probe_points(family: ParametricFamily, per_dim: int = 5) -> list[np.ndarray]:
    """Interior grid of ``per_dim`` points per coordinate, filtered by the domain constraint."""
    axes = []
    for lo, hi in family.param_domain:
        if np.isfinite(lo) and np.isfinite(hi):
            axes.append(lo + (hi - lo) * (np.arange(per_dim) + 1) / (per_dim + 1))
        else:
            axes.append(np.array([0.0]))
    pts = [np.array(q) for q in itertools.product(*axes)]
    pts = [q for q in pts if family.contains(q)]
    return pts or [np.asarray(family.reference_point)]


# ---------------------------------------------------------------------------
# canonical families
# ---------------------------------------------------------------------------

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def make_gaussian(mu_known: bool = False, sigma_known: bool = True, *, mu: float = 0.0,
                  sigma: float = 1.0, mu_range: tuple[float, float] = (-5.0, 5.0),
                  sigma_range: tuple[float, float] = (0.5, 2.0), nodes: int = 2001,
                  span: float = 10.0) -> ParametricFamily:
    """Normal family on a truncated grid spanning ``span`` scale units beyond the mean range.

    Known quantities are fixed at ``mu`` / ``sigma``; free ones become the
    coordinates ``mu`` and ``sigma`` (in that order).
    """
    if mu_known and sigma_known:
        raise FamilyError("at least one of mu and sigma must be a free coordinate")
    if sigma_known and not sigma > 0:
        raise FamilyError(f"sigma must be positive, got {sigma}")
    if not sigma_known and not sigma_range[0] > 0:
        raise FamilyError(f"sigma domain must lie in (0, inf), got {sigma_range}")
    names, domain = [], []
    if not mu_known:
        names.append("mu")
        domain.append(tuple(mu_range))
    if not sigma_known:
        names.append("sigma")
        domain.append(tuple(sigma_range))
    mu_lo, mu_hi = (mu, mu) if mu_known else mu_range
    sigma_hi = sigma if sigma_known else sigma_range[1]
    space = SampleSpace.grid(mu_lo - span * sigma_hi, mu_hi + span * sigma_hi, nodes)

    mu_idx = None if mu_known else 0
    sigma_idx = None if sigma_known else (0 if mu_known else 1)

    def unpack(p):
        m = mu if mu_idx is None else p[mu_idx]
        s = sigma if sigma_idx is None else p[sigma_idx]
        return m, s

    def log_density(p, X):
        m, s = unpack(p)
        z = (X[:, 0] - m) / s
        return -0.5 * z * z - math.log(s) - _HALF_LOG_2PI

    def score(p, X):
        m, s = unpack(p)
        z = (X[:, 0] - m) / s
        cols = []
        if mu_idx is not None:
            cols.append(z / s)
        if sigma_idx is not None:
            cols.append((z * z - 1.0) / s)
        return np.column_stack(cols)

    def sampler(p, rng, size):
        m, s = unpack(p)
        return rng.normal(m, s, size).reshape(-1, 1)

    def inside(value, bounds):
        return value if bounds[0] < value < bounds[1] else 0.5 * (bounds[0] + bounds[1])

    ref = []
    if mu_idx is not None:
        ref.append(inside(mu, mu_range))
    if sigma_idx is not None:
        ref.append(inside(sigma, sigma_range))
    return ParametricFamily("gaussian", tuple(names), tuple(domain), space, log_density,
                            analytic_score=score, sampler=sampler, reference_point=tuple(ref))


def make_bernoulli(p_range: tuple[float, float] = (0.0, 1.0)) -> ParametricFamily:
    if not 0.0 <= p_range[0] < p_range[1] <= 1.0:
        raise FamilyError(f"Bernoulli domain must lie within (0, 1), got {p_range}")
    space = SampleSpace.discrete([0.0, 1.0])

    def log_density(p, X):
        x = X[:, 0]
        return np.where(x == 1.0, math.log(p[0]), math.log1p(-p[0]))

    def score(p, X):
        x = X[:, 0]
        return (x / p[0] - (1.0 - x) / (1.0 - p[0])).reshape(-1, 1)

    def sampler(p, rng, size):
        return (rng.random(size) < p[0]).astype(float).reshape(-1, 1)

    return ParametricFamily("bernoulli", ("p",), (tuple(p_range),), space, log_density,
                            analytic_score=score, sampler=sampler)


def poisson_truncation(lam: float, tail_mass: float = 1e-12) -> int:
    """Smallest ``n`` with ``P(X > n) < tail_mass`` for ``X ~ Poisson(lam)``."""
    n = int(math.floor(lam))
    while stats.poisson.sf(n, lam) >= tail_mass:
        n += 1
    return n


def make_poisson(tail_mass: float = 1e-12,
                 lam_range: tuple[float, float] = (0.1, 10.0)) -> ParametricFamily:
    """Poisson family with support truncated for the largest rate in the domain."""
    if not 0.0 < tail_mass <= 1e-12:
        raise FamilyError(f"tail_mass must lie in (0, 1e-12], got {tail_mass}")
    if not 0.0 <= lam_range[0] < lam_range[1] < math.inf:
        raise FamilyError(f"Poisson rate domain must be a bounded subset of (0, inf), got {lam_range}")
    n_max = poisson_truncation(lam_range[1], tail_mass)
    space = SampleSpace.discrete(np.arange(n_max + 1, dtype=float))

    def log_density(p, X):
        x = X[:, 0]
        return x * math.log(p[0]) - p[0] - special.gammaln(x + 1.0)

    def score(p, X):
        return (X[:, 0] / p[0] - 1.0).reshape(-1, 1)

    def sampler(p, rng, size):
        return rng.poisson(p[0], size).astype(float).reshape(-1, 1)

    return ParametricFamily("poisson", ("lam",), (tuple(lam_range),), space, log_density,
                            analytic_score=score, sampler=sampler)


def make_categorical(m: int) -> ParametricFamily:
    """Categorical family on outcomes ``1..m``, charted by the first ``m - 1`` probabilities."""
    if int(m) != m or m < 2:
        raise FamilyError(f"categorical family needs m >= 2 outcomes, got {m}")
    m = int(m)
    space = SampleSpace.discrete(np.arange(1, m + 1, dtype=float),
                                 labels=[str(i) for i in range(1, m + 1)])

    def probs(p):
        return np.append(p, 1.0 - p.sum())

    def log_density(p, X):
        idx = np.rint(X[:, 0]).astype(int) - 1
        return np.log(probs(p))[idx]

    def score(p, X):
        idx = np.rint(X[:, 0]).astype(int) - 1
        pm = 1.0 - p.sum()
        S = np.zeros((idx.size, m - 1))
        hit = idx < m - 1
        S[np.flatnonzero(hit), idx[hit]] = 1.0 / p[idx[hit]]
        S[idx == m - 1, :] = -1.0 / pm
        return S

    def sampler(p, rng, size):
        return (rng.choice(m, size=size, p=probs(p)) + 1).astype(float).reshape(-1, 1)

    names = tuple(f"p{i}" for i in range(1, m))
    return ParametricFamily(f"categorical{m}", names, ((0.0, 1.0),) * (m - 1), space, log_density,
                            analytic_score=score, sampler=sampler,
                            constraint=lambda p: float(p.sum()) < 1.0,
                            reference_point=(1.0 / m,) * (m - 1))


# ---------------------------------------------------------------------------
# product and tabulated families
# ---------------------------------------------------------------------------

def make_product(factors: Sequence[ParametricFamily],
                 shared: Optional[Sequence[Mapping[str, str]]] = None,
                 name: Optional[str] = None) -> ParametricFamily:
    """Independent product of families, with coordinates identified through ``shared``.

    ``shared[j]`` maps each coordinate name of factor ``j`` to a joint
    coordinate name; factors mapping to the same joint name share that
    parameter. By default coordinates with equal names are shared.
    """
    factors = tuple(factors)
    if len(factors) < 2:
        raise FamilyError("a product family needs at least two factors")
    if shared is None:
        shared = [{n: n for n in f.coordinate_names} for f in factors]
    if len(shared) != len(factors):
        raise FamilyError("identification map needs one entry per factor")

    joint_names: list[str] = []
    lo: dict[str, float] = {}
    hi: dict[str, float] = {}
    ref: dict[str, float] = {}
    index_maps = []
    for j, (fam, ident) in enumerate(zip(factors, shared)):
        ident = dict(ident)
        unknown = set(ident) - set(fam.coordinate_names)
        missing = set(fam.coordinate_names) - set(ident)
        if unknown or missing:
            raise FamilyError(
                f"inconsistent identification map for factor {j} ({fam.name}): "
                f"unknown {sorted(unknown)}, unmapped {sorted(missing)}")
        targets = [ident[n] for n in fam.coordinate_names]
        if len(set(targets)) != len(targets):
            raise FamilyError(f"inconsistent identification map for factor {j}: "
                              "two coordinates identified with each other")
        for n, t, (a, b), r in zip(fam.coordinate_names, targets, fam.param_domain,
                                   fam.reference_point):
            if t not in lo:
                joint_names.append(t)
                lo[t], hi[t], ref[t] = a, b, r
            else:
                lo[t], hi[t] = max(lo[t], a), min(hi[t], b)
                if not lo[t] < hi[t]:
                    raise FamilyError(f"inconsistent identification map: shared coordinate {t!r} "
                                      "has an empty joint domain")
        index_maps.append(targets)
    pos = {n: i for i, n in enumerate(joint_names)}
    index_maps = [np.array([pos[t] for t in targets]) for targets in index_maps]
    for t in joint_names:
        if not lo[t] < ref[t] < hi[t]:
            ref[t] = 0.5 * (lo[t] + hi[t])

    space = SampleSpace.product([f.space for f in factors])
    col_slices = []
    start = 0
    for f in factors:
        col_slices.append(slice(start, start + f.space.dim))
        start += f.space.dim
    k = len(joint_names)

    def log_density(p, X):
        total = np.zeros(X.shape[0])
        for f, idx, cols in zip(factors, index_maps, col_slices):
            total = total + f.log_density(p[idx], X[:, cols])
        return total

    score = None
    if all(f.analytic_score is not None for f in factors):
        def score(p, X):
            S = np.zeros((X.shape[0], k))
            for f, idx, cols in zip(factors, index_maps, col_slices):
                S[:, idx] += f.analytic_score(p[idx], X[:, cols])
            return S

    sampler = None
    if all(f.sampler is not None for f in factors):
        def sampler(p, rng, size):
            return np.hstack([as_points(f.sampler(p[idx], rng, size), f.space.dim)
                              for f, idx in zip(factors, index_maps)])

    constraint = None
    if any(f.constraint is not None for f in factors):
        def constraint(p):
            return all(f.constraint is None or f.constraint(p[idx])
                       for f, idx in zip(factors, index_maps))

    return ParametricFamily(name or "product(" + ",".join(f.name for f in factors) + ")",
                            tuple(joint_names), tuple((lo[t], hi[t]) for t in joint_names),
                            space, log_density, analytic_score=score, sampler=sampler,
                            constraint=constraint,
                            reference_point=tuple(ref[t] for t in joint_names))


def make_tabulated(space: SampleSpace, param_grid: Sequence[Sequence[float]], densities,
                   coordinate_names: Optional[Sequence[str]] = None, name: str = "tabulated",
                   normalization_tol: float = 1e-6) -> ParametricFamily:
    """Family given by a table of densities on a rectangular parameter grid.

    ``densities`` has shape ``(*grid_shape, space.size)``. Densities are
    interpolated multilinearly in the parameters and are only defined at the
    space's reference points. Smoothness in the parameters is up to the table.
    """
    axes = [np.asarray(g, dtype=float).reshape(-1) for g in param_grid]
    k = len(axes)
    if k == 0:
        raise FamilyError("tabulated family needs at least one parameter axis")
    for i, ax in enumerate(axes):
        if ax.size < 2 or np.any(np.diff(ax) <= 0):
            raise FamilyError(f"parameter axis {i} must be strictly increasing with >= 2 values")
    table = np.asarray(densities, dtype=float)
    expected = tuple(ax.size for ax in axes) + (space.size,)
    if table.shape != expected:
        raise FamilyError(f"density table has shape {table.shape}, expected {expected}")
    if not np.all(np.isfinite(table)):
        raise FamilyError("density table contains non-finite values")
    if np.any(table < 0):
        bad = np.argwhere(table < 0)[0]
        raise FamilyError(f"negative density in table at index {tuple(int(i) for i in bad)}")
    totals = table @ space.weights
    off = np.abs(totals - 1.0)
    if np.any(off > normalization_tol):
        bad = np.unravel_index(int(np.argmax(off)), off.shape)
        at = tuple(float(ax[i]) for ax, i in zip(axes, bad))
        raise FamilyError(f"density table row at parameter {at} integrates to "
                          f"{float(totals[bad])!r}, not 1 (tolerance {normalization_tol})")
    names = tuple(coordinate_names) if coordinate_names is not None else (
        ("theta",) if k == 1 else tuple(f"theta{i + 1}" for i in range(k)))
    interp = RegularGridInterpolator(axes, table, method="linear", bounds_error=True)
    pts = space.points
    if space.dim == 1:
        nodes = pts[:, 0]
        order = np.argsort(nodes)
        sorted_nodes = nodes[order]

        def locate(X):
            x = X[:, 0]
            j = np.clip(np.searchsorted(sorted_nodes, x), 0, sorted_nodes.size - 1)
            if not np.array_equal(sorted_nodes[j], x):
                raise DomainError("tabulated densities are only defined at reference points")
            return order[j]
    else:
        lookup = {tuple(row): i for i, row in enumerate(pts)}

        def locate(X):
            try:
                return np.array([lookup[tuple(row)] for row in X], dtype=int)
            except KeyError:
                raise DomainError("tabulated densities are only defined at reference points") from None

    def log_density(p, X):
        row = interp(p.reshape(1, -1))[0]
        with np.errstate(divide="ignore"):
            return np.log(row[locate(X)])

    domain = tuple((float(ax[0]), float(ax[-1])) for ax in axes)
    return ParametricFamily(name, names, domain, space, log_density,
                            normalization_tol=normalization_tol)
