"""Log-likelihoods and score one-forms.

The score of an observation ``x`` in direction ``v`` is the derivative of
``t -> log f_{p + t v}(x)`` at ``t = 0``. It is evaluated from the family's
analytic coordinate scores when available, otherwise by central finite
differences of the log-density. Either way the result does not depend on
the reference measure, which :func:`check_reference_measure_invariance`
exercises directly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ScoreError
from .expectation import EXACT, ExpectationMethod, integrate, rule
from .model_space import TINY_DENSITY, ParametricFamily

LOG_TINY = math.log(TINY_DENSITY)


@dataclass(frozen=True)
class FDScheme:
    """Central differences with step ``relative_step * max(1, |p_i|)`` per coordinate.

    The step is halved up to ``max_shrinks`` times when the stencil would
    leave the parameter domain.
    """

    relative_step: float = 1e-5
    max_shrinks: int = 2

    def __post_init__(self):
        if not self.relative_step > 0:
            raise ValueError("relative_step must be positive")


DEFAULT_FD = FDScheme()


@dataclass(frozen=True, eq=False)
class TangentVector:
    base_point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.base_point, dtype=float).reshape(-1)
        comp = np.asarray(self.components, dtype=float).reshape(-1)
        if bp.shape != comp.shape:
            raise ValueError("tangent vector components must match the base point dimension")
        if not np.all(np.isfinite(comp)):
            raise ValueError("tangent vector components must be finite")
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "components", comp)

    @classmethod
    def coordinate(cls, p, i: int) -> "TangentVector":
        p = np.asarray(p, dtype=float).reshape(-1)
        e = np.zeros_like(p)
        e[i] = 1.0
        return cls(p, e)


def _components(p: np.ndarray, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        if not np.array_equal(v.base_point, p):
            raise ValueError("tangent vector is not based at the evaluation point")
        return v.components
    comp = np.asarray(v, dtype=float).reshape(-1)
    if comp.shape != p.shape:
        raise ValueError("tangent vector components must match the parameter dimension")
    return comp


def fd_step(family: ParametricFamily, p: np.ndarray, direction: np.ndarray,
            fd: FDScheme = DEFAULT_FD) -> float:
    """Step ``h`` along ``direction`` such that ``p +- h * direction`` stays in the domain."""
    active = direction != 0
    # subnormal components divide to inf; min() then ignores them
    with np.errstate(over="ignore"):
        h = fd.relative_step * float(np.min(np.maximum(1.0, np.abs(p[active])) / np.abs(direction[active])))
    for _ in range(fd.max_shrinks + 1):
        if family.contains(p + h * direction) and family.contains(p - h * direction):
            return h
        h *= 0.5
    raise ScoreError(f"finite-difference stencil leaves the domain of {family.name!r} "
                     f"at {tuple(p)} along {tuple(direction)}")


def _require_positive(family: ParametricFamily, p: np.ndarray, X: np.ndarray):
    L = family.log_density(p, X)
    bad = ~(L > LOG_TINY)
    if np.any(bad):
        x = X[np.flatnonzero(bad)[0]]
        raise ScoreError(f"density of {family.name!r} at p={tuple(p)} is zero at x={tuple(x)}")


def _fd_along(family: ParametricFamily, p: np.ndarray, direction: np.ndarray, X: np.ndarray,
              fd: FDScheme) -> np.ndarray:
    # differentiate along the unit-max direction and rescale, so tiny components cannot overflow h
    scale = float(np.max(np.abs(direction)))
    if scale != 1.0:
        return scale * _fd_along(family, p, direction / scale, X, fd)
    h = fd_step(family, p, direction, fd)
    Lp = family.log_density(p + h * direction, X)
    Lm = family.log_density(p - h * direction, X)
    if not (np.all(np.isfinite(Lp)) and np.all(np.isfinite(Lm))):
        raise ScoreError(f"density of {family.name!r} vanishes on the finite-difference stencil "
                         f"around {tuple(p)}")
    return (Lp - Lm) / (2.0 * h)


def log_likelihood(family: ParametricFamily, p, x) -> float:
    p = family.check(p)
    X = family.points(x)
    if X.shape[0] != 1:
        raise ValueError("log_likelihood takes a single sample point")
    L = float(family.log_density(p, X)[0])
    if not L > LOG_TINY:
        raise ScoreError(f"density of {family.name!r} at p={tuple(p)} is zero at x={tuple(X[0])}")
    return L


def coordinate_scores(family: ParametricFamily, p, X, fd: FDScheme = DEFAULT_FD,
                      check: bool = True) -> np.ndarray:
    """Partial derivatives of the log-likelihood, shape ``(n, k)``."""
    p = family.check(p)
    X = family.points(X)
    if check:
        _require_positive(family, p, X)
    if family.analytic_score is not None:
        return np.asarray(family.analytic_score(p, X), dtype=float).reshape(X.shape[0], family.k)
    cols = []
    for i in range(family.k):
        e = np.zeros(family.k)
        e[i] = 1.0
        cols.append(_fd_along(family, p, e, X, fd))
    return np.column_stack(cols)


def directional_scores(family: ParametricFamily, p, v, X, fd: FDScheme = DEFAULT_FD,
                       check: bool = True) -> np.ndarray:
    """Scores in direction ``v`` at each of the points ``X``, shape ``(n,)``."""
    p = family.check(p)
    comp = _components(p, v)
    X = family.points(X)
    if check:
        _require_positive(family, p, X)
    if not np.any(comp):
        return np.zeros(X.shape[0])
    if family.analytic_score is not None:
        return coordinate_scores(family, p, X, fd, check=False) @ comp
    return _fd_along(family, p, comp, X, fd)


def score_directional(family: ParametricFamily, p, v, x, fd: FDScheme = DEFAULT_FD) -> float:
    X = family.points(x)
    if X.shape[0] != 1:
        raise ValueError("score_directional takes a single sample point")
    return float(directional_scores(family, p, v, X, fd)[0])


def score_mean(family: ParametricFamily, p, v, method: ExpectationMethod = EXACT,
               fd: FDScheme = DEFAULT_FD) -> float:
    """Expected score in direction ``v``; zero for any regular family."""
    p = family.check(p)
    r = rule(family, p, method)
    return integrate(directional_scores(family, p, v, r.points, fd, check=False), r)


def reweight(family: ParametricFamily,
             weight: Callable[[np.ndarray], np.ndarray]) -> ParametricFamily:
    """The same models against the reference measure ``weight * mu``.

    Densities become ``f_p / weight``; the score is unchanged because
    ``log weight`` does not depend on the parameter.
    """
    wv = np.asarray(weight(family.space.points), dtype=float).reshape(-1)
    space = family.space.reweighted(wv)
    base = family.log_density

    def log_density(p, X):
        w = np.asarray(weight(X), dtype=float).reshape(-1)
        if np.any(~(w > 0)):
            raise ValueError("reference-measure weight must be strictly positive")
        return base(p, X) - np.log(w)

    return dataclasses.replace(family, name=f"{family.name}[reweighted]", space=space,
                               log_density=log_density, check_normalization=False)


def check_reference_measure_invariance(family: ParametricFamily, weight, p, v, x,
                                       fd: FDScheme = DEFAULT_FD) -> tuple[float, float]:
    """Score at ``x`` under the original and a reweighted reference measure."""
    other = reweight(family, weight)
    return (score_directional(family, p, v, x, fd), score_directional(other, p, v, x, fd))


def argmax_log_likelihood(family: ParametricFamily, x, param_points) -> int:
    """Index of the parameter point (from ``param_points``) maximizing ``L_x``."""
    X = family.points(x)
    values = [float(family.log_density(family.check(q), X)[0]) for q in param_points]
    return int(np.argmax(values))
