"""Estimators, unbiasedness, variance, and verification of the variance bound.

Besides comparing variance and bound, two identities behind the bound are
replayed numerically: the derivative of ``theta`` along ``v`` equals
``E[theta_hat * score(v)]`` (:func:`dtheta_via_estimator`), and the
Cauchy-Schwarz chain ``|grad theta|^2 = E[(theta_hat - theta) score(grad theta)]
<= sqrt(V) sqrt(I(grad theta, grad theta)) = sqrt(V) |grad theta|``
(:func:`proof_chain_check`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .expectation import (EXACT, MIN_VARIANCE_SAMPLES, ExpectationMethod, evaluate_on, integrate,
                          rule)
from .geometry import ParameterFunction, crb, fisher_matrix, gradient
from .model_space import ParametricFamily, probe_points
from .score import DEFAULT_FD, FDScheme, _components, directional_scores, fd_step

BIAS_TOL = 1e-8
SLACK_TOL = 1e-7
MC_MARGIN = 3.0
MC_PASS_RATE = 0.95
MIN_MC_VERIFY_SAMPLES = 10_000


@dataclass(frozen=True, eq=False)
class Estimator:
    """A statistic on the sample space, vectorized over points of shape ``(n, d)``."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    label: str = "estimator"

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.asarray(self.evaluate(X), dtype=float)
        return np.broadcast_to(out, (X.shape[0],)) if out.ndim == 0 else out.reshape(-1)

    @classmethod
    def from_expression(cls, source: str, sample_names: Sequence[str]) -> "Estimator":
        from .expr import evaluate, parse

        names = tuple(sample_names)
        tree = parse(source, names)
        return cls(lambda X: evaluate(tree, {n: X[:, i] for i, n in enumerate(names)}), source)

    @classmethod
    def coordinate(cls, i: int = 0, label: Optional[str] = None) -> "Estimator":
        return cls(lambda X: X[:, i], label or f"x{i + 1}")

    @classmethod
    def constant(cls, c: float) -> "Estimator":
        return cls(lambda X: np.full(X.shape[0], float(c)), repr(float(c)))


class VarianceEstimate(NamedTuple):
    value: float
    std_error: Optional[float]
    mean: float


def _bound_method(family: ParametricFamily, method: ExpectationMethod) -> ExpectationMethod:
    # the bound is a deterministic quantity; compute it exactly whenever possible
    return EXACT if family.space.admits_exact else method


def bias(estimator: Estimator, theta: ParameterFunction, family: ParametricFamily, p,
         method: ExpectationMethod = EXACT) -> float:
    p = family.check(p)
    r = rule(family, p, method)
    return integrate(evaluate_on(estimator, r), r) - theta(p)


def max_probe_bias(estimator: Estimator, theta: ParameterFunction, family: ParametricFamily,
                   per_dim: int = 5) -> float:
    """Largest absolute bias over the interior probe grid (exact expectation)."""
    return max(abs(bias(estimator, theta, family, q, EXACT))
               for q in probe_points(family, per_dim))


def _centered_squares(values: np.ndarray, r) -> np.ndarray:
    # shift by a sample value first so that constant estimators give exactly zero
    d = values - values[int(np.argmax(r.weights))]
    d = d - integrate(d, r)
    return d * d


def variance(estimator: Estimator, family: ParametricFamily, p,
             method: ExpectationMethod = EXACT) -> VarianceEstimate:
    """Two-pass variance; Monte Carlo runs also report the standard error of the estimate."""
    p = family.check(p)
    if not method.is_exact and method.mc_samples < MIN_VARIANCE_SAMPLES:
        raise ValueError(f"variance estimates need at least {MIN_VARIANCE_SAMPLES} samples")
    r = rule(family, p, method)
    values = evaluate_on(estimator, r)
    mean = integrate(values, r)
    sq = _centered_squares(values, r)
    var = integrate(sq, r)
    if r.exact:
        return VarianceEstimate(var, None, mean)
    n = r.size
    m4 = integrate(sq * sq, r)
    se = math.sqrt(max(m4 - (n - 3) / (n - 1) * var * var, 0.0) / n)
    return VarianceEstimate(var, se, mean)


@dataclass
class BoundReport:
    at: list[float]
    coordinates: list[str]
    family: str
    theta: str
    estimator: str
    theta_value: float
    estimator_mean: float
    bias: float
    max_probe_bias: Optional[float]
    biased: bool
    variance: float
    bound: float
    slack: float
    efficiency: Optional[float]
    condition_estimate: float
    method: dict
    mc_std_error: Optional[float] = None
    bound_applies: bool = field(init=False)

    def __post_init__(self):
        self.bound_applies = not self.biased

    @property
    def passed(self) -> bool:
        if not self.bound_applies:
            return False
        if self.mc_std_error is None:
            return self.slack >= -SLACK_TOL
        return self.slack >= -MC_MARGIN * self.mc_std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_bound(estimator: Estimator, theta: ParameterFunction, family: ParametricFamily, p,
                 method: ExpectationMethod = EXACT, fd: FDScheme = DEFAULT_FD,
                 bias_tol: float = BIAS_TOL) -> BoundReport:
    """Variance of ``estimator`` against the bound for ``theta`` at ``p``.

    Unbiasedness is a hypothesis of the bound. It is checked exactly on an
    interior probe grid when the space can be enumerated; a biased estimator
    yields a report with ``bound_applies`` false instead of an error.
    """
    p = family.check(p)
    bmethod = _bound_method(family, method)
    fisher = fisher_matrix(family, p, bmethod, fd)
    grad = gradient(theta, fisher, family)
    var = variance(estimator, family, p, method)
    theta_value = theta(p)
    b = var.mean - theta_value
    if family.space.admits_exact:
        probe = max(max_probe_bias(estimator, theta, family), abs(bias(estimator, theta, family, p)))
        biased = probe > bias_tol
    else:
        probe = None
        biased = abs(b) > 4.0 * math.sqrt(var.value / method.mc_samples) + bias_tol
    bound = grad.squared_norm
    return BoundReport(
        at=[float(x) for x in p], coordinates=list(family.coordinate_names), family=family.name,
        theta=theta.label, estimator=estimator.label, theta_value=theta_value,
        estimator_mean=var.mean, bias=b, max_probe_bias=probe, biased=bool(biased),
        variance=var.value, bound=bound, slack=var.value - bound,
        efficiency=bound / var.value if var.value > 0 else None,
        condition_estimate=fisher.condition_estimate, method=method.describe(),
        mc_std_error=var.std_error)


def dtheta_via_estimator(estimator: Estimator, family: ParametricFamily, p, v,
                         method: ExpectationMethod = EXACT,
                         fd: FDScheme = DEFAULT_FD) -> tuple[float, float]:
    """``(d/dt E(theta_hat | p + t v), E[theta_hat * score(v)])``; equal for any estimator."""
    p = family.check(p)
    comp = _components(p, v)
    r = rule(family, p, method)
    rhs = integrate(evaluate_on(estimator, r) * directional_scores(family, p, comp, r.points, fd,
                                                                   check=False), r)
    if not np.any(comp):
        return 0.0, rhs
    h = fd_step(family, p, comp, fd)

    def mean_at(q):
        rq = rule(family, q, method)
        return integrate(evaluate_on(estimator, rq), rq)

    lhs = (mean_at(p + h * comp) - mean_at(p - h * comp)) / (2.0 * h)
    return lhs, rhs


class ProofChain(NamedTuple):
    """``a = |grad|^2``, ``b = E[(theta_hat - theta) score(grad)]``,
    ``c = sqrt(V) sqrt(I(grad, grad))``, ``d = sqrt(V) |grad|``."""

    a: float
    b: float
    c: float
    d: float

    def steps(self, eq_tol: float = 1e-7, ineq_tol: float = 1e-9) -> dict[str, bool]:
        return {
            "a=b": abs(self.a - self.b) <= eq_tol,
            "b<=c": self.b <= self.c + ineq_tol,
            "c=d": abs(self.c - self.d) <= ineq_tol,
        }

    def holds(self, eq_tol: float = 1e-7, ineq_tol: float = 1e-9) -> bool:
        return all(self.steps(eq_tol, ineq_tol).values())

    def saturated(self, tol: float = 1e-6) -> bool:
        vals = np.array(self)
        return float(np.max(vals) - np.min(vals)) <= tol


def proof_chain_check(estimator: Estimator, theta: ParameterFunction, family: ParametricFamily,
                      p, method: ExpectationMethod = EXACT,
                      fd: FDScheme = DEFAULT_FD) -> ProofChain:
    p = family.check(p)
    fisher = fisher_matrix(family, p, method, fd)
    grad = gradient(theta, fisher, family)
    r = rule(family, p, method)
    lam = directional_scores(family, p, grad.components, r.points, fd, check=False)
    values = evaluate_on(estimator, r)
    a = grad.squared_norm
    b = integrate((values - theta(p)) * lam, r)
    V = integrate(_centered_squares(values, r), r)
    metric = integrate(lam * lam, r)
    c = math.sqrt(V) * math.sqrt(metric)
    d = math.sqrt(V) * math.sqrt(max(a, 0.0))
    return ProofChain(a, b, c, d)


@dataclass
class MCSummary:
    seeds: list[int]
    mc_samples: int
    bound: float
    variances: list[float]
    std_errors: list[float]
    passes: list[bool]
    pass_rate: float
    min_slack: float

    @property
    def passed(self) -> bool:
        return self.pass_rate >= MC_PASS_RATE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def mc_verify(estimator: Estimator, theta: ParameterFunction, family: ParametricFamily, p,
              seeds: Sequence[int], mc_samples: int = 100_000, fd: FDScheme = DEFAULT_FD,
              workers: int = 1) -> MCSummary:
    """Per seed, pass when the empirical variance exceeds ``bound - 3 * std_error``."""
    if mc_samples < MIN_MC_VERIFY_SAMPLES:
        raise ValueError(f"mc_verify needs at least {MIN_MC_VERIFY_SAMPLES} samples per seed")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("mc_verify needs at least one seed")
    p = family.check(p)
    first = ExpectationMethod.monte_carlo(mc_samples, seeds[0], workers)
    bound = crb(theta, family, p, _bound_method(family, first), fd)
    variances, errors, passes = [], [], []
    for s in seeds:
        est = variance(estimator, family, p, ExpectationMethod.monte_carlo(mc_samples, s, workers))
        variances.append(est.value)
        errors.append(est.std_error)
        passes.append(bool(est.value >= bound - MC_MARGIN * est.std_error))
    return MCSummary(seeds, int(mc_samples), bound, variances, errors, passes,
                     sum(passes) / len(passes), min(v - bound for v in variances))
