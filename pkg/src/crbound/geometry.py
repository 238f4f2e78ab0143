"""Fisher-Rao metric in coordinates, metric gradients, and the variance bound.

The metric is ``I(u, v) = E[score(u) score(v)]``; its coordinate matrix is
the Fisher information. The gradient of a scalar parameter function is
``grad theta = I^{-1} d theta`` and the variance bound for unbiased
estimators of ``theta`` is ``|grad theta|^2 = d theta^T I^{-1} d theta``.
Charts (:class:`Chart`) re-express a family in new coordinates, which is how
the coordinate independence of the bound is tested.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import FamilyError, SingularInformation
from .expectation import EXACT, ExpectationMethod, integrate, rule
from .model_space import ParametricFamily, probe_points
from .score import DEFAULT_FD, FDScheme, coordinate_scores, directional_scores, fd_step

PD_RELATIVE_THRESHOLD = 1e-10
INVERSE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    at: np.ndarray
    entries: np.ndarray
    inverse: np.ndarray
    condition_estimate: float
    method: ExpectationMethod

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_entries(cls, at, entries, method: ExpectationMethod = EXACT) -> "FisherMatrix":
        """Symmetrize, check positive definiteness, and invert by Cholesky factorization."""
        at = np.asarray(at, dtype=float).reshape(-1)
        A = np.asarray(entries, dtype=float)
        where = f"at {tuple(float(a) for a in at)}"
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("Fisher matrix must be square")
        if not np.all(np.isfinite(A)):
            raise SingularInformation(f"Fisher information is not finite {where}", at)
        A = 0.5 * (A + A.T)
        eig = np.linalg.eigvalsh(A)
        scale = float(np.max(np.diag(A)))
        if not scale > 0 or eig[0] <= PD_RELATIVE_THRESHOLD * scale:
            raise SingularInformation(
                f"Fisher information is singular or indefinite {where} "
                f"(smallest eigenvalue {eig[0]:.3e}, largest diagonal {scale:.3e})", at)
        try:
            factor = scipy.linalg.cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            raise SingularInformation(f"Cholesky factorization failed {where}", at) from None
        inv = scipy.linalg.cho_solve(factor, np.eye(A.shape[0]))
        inv = 0.5 * (inv + inv.T)
        residual = float(np.max(np.abs(A @ inv - np.eye(A.shape[0]))))
        if residual > INVERSE_RESIDUAL_TOL:
            raise SingularInformation(
                f"Fisher information is too ill-conditioned to invert {where} "
                f"(residual {residual:.3e})", at)
        for arr in (A, inv, at):
            arr.setflags(write=False)
        return cls(at, A, inv, float(eig[-1] / eig[0]), method)


def fisher_matrix(family: ParametricFamily, p, method: ExpectationMethod = EXACT,
                  fd: FDScheme = DEFAULT_FD) -> FisherMatrix:
    p = family.check(p)
    r = rule(family, p, method)
    S = coordinate_scores(family, p, r.points, fd, check=False)
    k = family.k
    I = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            I[i, j] = I[j, i] = integrate(S[:, i] * S[:, j], r)
    return FisherMatrix.from_entries(p, I, method)


def metric_pair(family: ParametricFamily, p, u, v, method: ExpectationMethod = EXACT,
                fd: FDScheme = DEFAULT_FD) -> float:
    """The Fisher-Rao inner product of two tangent vectors at ``p``."""
    p = family.check(p)
    r = rule(family, p, method)
    su = directional_scores(family, p, u, r.points, fd, check=False)
    sv = directional_scores(family, p, v, r.points, fd, check=False)
    return integrate(su * sv, r)


@dataclass(frozen=True, eq=False)
class ParameterFunction:
    """A scalar function of the parameter vector with its partial derivatives.

    Without ``grad``, partials are central finite differences using ``fd``.
    """

    evaluate: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "theta"
    fd: FDScheme = DEFAULT_FD

    def __call__(self, p) -> float:
        return float(self.evaluate(np.asarray(p, dtype=float).reshape(-1)))

    def partials(self, p, family: Optional[ParametricFamily] = None) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(-1)
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float).reshape(-1)
        out = np.empty(p.size)
        for i in range(p.size):
            e = np.zeros(p.size)
            e[i] = 1.0
            if family is not None:
                h = fd_step(family, p, e, self.fd)
            else:
                h = self.fd.relative_step * max(1.0, abs(p[i]))
            out[i] = (self(p + h * e) - self(p - h * e)) / (2.0 * h)
        return out

    @classmethod
    def coordinate(cls, j: int, label: Optional[str] = None) -> "ParameterFunction":
        def grad(p):
            g = np.zeros(p.size)
            g[j] = 1.0
            return g
        return cls(lambda p: p[j], grad, label or f"phi{j + 1}")

    @classmethod
    def constant(cls, c: float) -> "ParameterFunction":
        return cls(lambda p: float(c), lambda p: np.zeros(p.size), repr(float(c)))

    @classmethod
    def from_expression(cls, source: str, coordinate_names: Sequence[str],
                        fd: FDScheme = DEFAULT_FD) -> "ParameterFunction":
        from .expr import evaluate, parse

        names = tuple(coordinate_names)
        tree = parse(source, names)
        return cls(lambda p: float(evaluate(tree, dict(zip(names, p)))), None, source, fd)


@dataclass(frozen=True, eq=False)
class GradientVector:
    base_point: np.ndarray
    components: np.ndarray
    squared_norm: float
    differential: np.ndarray

    @property
    def dtheta_of_gradient(self) -> float:
        """``d theta`` applied to the gradient itself."""
        return float(np.dot(self.differential, self.components))


def gradient(theta: ParameterFunction, fisher: FisherMatrix,
             family: Optional[ParametricFamily] = None) -> GradientVector:
    d = theta.partials(fisher.at, family)
    if d.shape != (fisher.k,) or not np.all(np.isfinite(d)):
        raise ValueError(f"partials of {theta.label!r} are not a finite {fisher.k}-vector")
    comps = fisher.inverse @ d
    sq = float(np.einsum("mi,i,m->", fisher.inverse, d, d))
    return GradientVector(fisher.at, comps, sq, d)


def crb(theta: ParameterFunction, family: ParametricFamily, p,
        method: ExpectationMethod = EXACT, fd: FDScheme = DEFAULT_FD) -> float:
    """Lower bound on the variance of any unbiased estimator of ``theta`` at ``p``."""
    return gradient(theta, fisher_matrix(family, p, method, fd), family).squared_norm


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Chart:
    """New coordinates ``psi = forward(phi)`` with ``phi = inverse(psi)``.

    ``jacobian(psi)`` is the matrix ``d phi / d psi`` (rows: old coordinates,
    columns: new ones); finite differences of ``inverse`` are used if absent.
    """

    names: tuple[str, ...]
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "chart"
    fd: FDScheme = DEFAULT_FD

    def to_new(self, phi) -> np.ndarray:
        return np.asarray(self.forward(np.asarray(phi, dtype=float).reshape(-1)), dtype=float)

    def to_old(self, psi) -> np.ndarray:
        return np.asarray(self.inverse(np.asarray(psi, dtype=float).reshape(-1)), dtype=float)

    def jacobian_at(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=float).reshape(-1)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(psi), dtype=float).reshape(-1, psi.size)
        cols = []
        for j in range(psi.size):
            e = np.zeros(psi.size)
            e[j] = 1.0
            h = self.fd.relative_step * max(1.0, abs(psi[j]))
            cols.append((self.to_old(psi + h * e) - self.to_old(psi - h * e)) / (2.0 * h))
        return np.column_stack(cols)


def identity_chart(names: Sequence[str]) -> Chart:
    k = len(names)
    return Chart(tuple(names), lambda p: p.copy(), lambda q: q.copy(),
                 lambda q: np.eye(k), "identity")


def affine_chart(names: Sequence[str], scale, shift) -> Chart:
    scale = np.asarray(scale, dtype=float) * np.ones(len(names))
    shift = np.asarray(shift, dtype=float) * np.ones(len(names))
    if np.any(scale == 0):
        raise FamilyError("affine chart needs nonzero scale factors")
    return Chart(tuple(names), lambda p: scale * p + shift, lambda q: (q - shift) / scale,
                 lambda q: np.diag(1.0 / scale), "affine")


def log_odds_chart(name: str = "logit_p") -> Chart:
    def forward(p):
        with np.errstate(divide="ignore"):
            return np.log(p) - np.log1p(-p)

    def inverse(q):
        return 1.0 / (1.0 + np.exp(-q))

    def jac(q):
        s = inverse(q)
        return np.diag(s * (1.0 - s))

    return Chart((name,), forward, inverse, jac, "log-odds")


def log_chart(names: Sequence[str], which: Sequence[int], new_names: Optional[Sequence[str]] = None
              ) -> Chart:
    """Log of the coordinates listed in ``which``; the rest are unchanged."""
    idx = np.zeros(len(names), dtype=bool)
    idx[list(which)] = True
    new = tuple(new_names) if new_names is not None else tuple(
        f"log_{n}" if flag else n for n, flag in zip(names, idx))

    def forward(p):
        q = p.copy()
        with np.errstate(divide="ignore"):
            q[idx] = np.log(p[idx])
        return q

    def inverse(q):
        p = q.copy()
        p[idx] = np.exp(q[idx])
        return p

    def jac(q):
        return np.diag(np.where(idx, np.exp(q), 1.0))

    return Chart(new, forward, inverse, jac, "log")


def reparameterize(family: ParametricFamily, chart: Chart,
                   domain: Optional[Sequence[tuple[float, float]]] = None) -> ParametricFamily:
    """The same models expressed in the chart's coordinates.

    Without ``domain`` the new box is the coordinatewise image of the old
    box's corners, which is exact for coordinatewise monotone charts. The
    old domain (including any constraint) is enforced through the inverse.
    """
    k = family.k
    if len(chart.names) != k:
        raise FamilyError(f"chart has {len(chart.names)} coordinates, family has {k}")
    for phi in probe_points(family):
        psi = chart.to_new(phi)
        back = chart.to_old(psi)
        if not (np.all(np.isfinite(psi)) and np.allclose(back, phi, rtol=1e-8, atol=1e-12)):
            raise FamilyError(f"chart {chart.label!r} is not invertible at {tuple(phi)}")
        J = chart.jacobian_at(psi)
        if J.shape != (k, k) or not abs(np.linalg.det(J)) > 1e-300 or np.linalg.cond(J) > 1e12:
            raise FamilyError(f"chart {chart.label!r} has a singular Jacobian at {tuple(phi)}")
    if domain is None:
        corners = np.array([chart.to_new(np.array(c))
                            for c in itertools.product(*family.param_domain)])
        domain = tuple((float(np.min(corners[:, i])), float(np.max(corners[:, i])))
                       for i in range(k))
    ref = tuple(float(x) for x in chart.to_new(family.reference_point))

    def constraint(psi):
        phi = chart.to_old(psi)
        return bool(np.all(np.isfinite(phi))) and family.contains(phi)

    def log_density(psi, X):
        return family.log_density(chart.to_old(psi), X)

    score = None
    if family.analytic_score is not None:
        def score(psi, X):
            return family.analytic_score(chart.to_old(psi), X) @ chart.jacobian_at(psi)

    sampler = None
    if family.sampler is not None:
        def sampler(psi, rng, size):
            return family.sampler(chart.to_old(psi), rng, size)

    return ParametricFamily(f"{family.name}[{chart.label}]", chart.names, tuple(domain),
                            family.space, log_density, analytic_score=score, sampler=sampler,
                            constraint=constraint, reference_point=ref,
                            check_normalization=False)


def pullback(theta: ParameterFunction, chart: Chart) -> ParameterFunction:
    """``theta`` written in the chart's coordinates, with chain-rule partials."""
    def evaluate(psi):
        return theta(chart.to_old(psi))

    def grad(psi):
        return chart.jacobian_at(psi).T @ theta.partials(chart.to_old(psi))

    return ParameterFunction(evaluate, grad, f"{theta.label}[{chart.label}]", theta.fd)


def builtin_charts(family: ParametricFamily) -> list[Chart]:
    """Charts used by the invariance checks: identity, an affine map, and log / log-odds maps
    for coordinates confined to (0, inf) or (0, 1)."""
    names = family.coordinate_names
    charts = [identity_chart(names), affine_chart([f"{n}_aff" for n in names], 2.0, 0.5)]
    unit = [i for i, (lo, hi) in enumerate(family.param_domain) if lo >= 0.0 and hi <= 1.0]
    positive = [i for i, (lo, _) in enumerate(family.param_domain) if lo >= 0.0]
    if family.k == 1 and unit:
        charts.append(log_odds_chart(f"logit_{names[0]}"))
    elif positive and not unit:
        charts.append(log_chart(names, positive))
    return charts
