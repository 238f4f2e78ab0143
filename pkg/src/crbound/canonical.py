"""The canonical matrix of families, parameter functions and unbiased estimators.

Used by the test suite and the experiment scripts. Each case pairs an
estimator with the parameter function it is unbiased for; ``efficient``
marks cases whose variance attains the bound exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import Estimator
from .geometry import ParameterFunction
from .model_space import (ParametricFamily, SampleSpace, make_bernoulli, make_categorical,
                          make_gaussian, make_poisson, make_product, make_tabulated)


def two_channel(nodes: int = 401) -> ParametricFamily:
    """N(mu, 1) x N(mu, 4) with a shared mean."""
    return make_product([make_gaussian(sigma=1.0, nodes=nodes),
                         make_gaussian(sigma=2.0, nodes=nodes)], name="two_channel")


def bernoulli_pair() -> ParametricFamily:
    return make_product([make_bernoulli(), make_bernoulli()], name="bernoulli_pair")


def tabulated_bernoulli() -> ParametricFamily:
    grid = np.round(np.arange(1, 10) / 10.0, 12)
    table = np.column_stack([1.0 - grid, grid])
    return make_tabulated(SampleSpace.discrete([0.0, 1.0]), [grid], table, ["p"],
                          name="tabulated_bernoulli")


def canonical_families() -> dict[str, ParametricFamily]:
    return {
        "gaussian_mu": make_gaussian(),
        "gaussian_sigma": make_gaussian(mu_known=True, sigma_known=False),
        "gaussian_mu_sigma": make_gaussian(False, False, mu_range=(-2.0, 2.0),
                                           sigma_range=(0.75, 1.5)),
        "bernoulli": make_bernoulli(),
        "poisson": make_poisson(),
        "categorical3": make_categorical(3),
        "two_channel": two_channel(),
        "bernoulli_pair": bernoulli_pair(),
        "tabulated_bernoulli": tabulated_bernoulli(),
    }


@dataclass(frozen=True, eq=False)
class Case:
    name: str
    family: ParametricFamily
    theta: ParameterFunction
    estimator: Estimator
    points: tuple[tuple[float, ...], ...]
    efficient: bool
    headline: bool = False  # one of the five named efficient cases


def _indicator(value: float, label: str) -> Estimator:
    return Estimator(lambda X: (X[:, 0] == value).astype(float), label)


def canonical_cases(families: dict[str, ParametricFamily] | None = None) -> list[Case]:
    f = families or canonical_families()
    mu = ParameterFunction.coordinate(0, "mu")
    x = Estimator.coordinate(0, "x")
    return [
        Case("gaussian_mean", f["gaussian_mu"], mu, x, ((-1.0,), (0.0,), (1.5,), (2.0,)), True, True),
        Case("gaussian_square", f["gaussian_mu"], ParameterFunction.from_expression("mu^2", ["mu"]),
             Estimator.from_expression("x^2 - 1", ["x"]), ((-1.0,), (0.5,), (1.5,)), False),
        Case("gaussian_scale", f["gaussian_sigma"],
             ParameterFunction.from_expression("sigma^2", ["sigma"]),
             Estimator.from_expression("x^2", ["x"]), ((0.7,), (1.0,), (1.5,)), True),
        Case("gaussian_location_scale", f["gaussian_mu_sigma"], mu, x,
             ((0.0, 1.0), (0.5, 1.2), (-1.0, 0.8)), True),
        Case("bernoulli_p", f["bernoulli"], ParameterFunction.coordinate(0, "p"), x,
             ((0.2,), (0.3,), (0.5,), (0.7,)), True, True),
        Case("poisson_rate", f["poisson"], ParameterFunction.coordinate(0, "lam"), x,
             ((0.5,), (2.0,), (5.0,)), True, True),
        Case("poisson_zero", f["poisson"],
             ParameterFunction(lambda p: np.exp(-p[0]), lambda p: np.array([-np.exp(-p[0])]),
                               "exp(-lam)"),
             _indicator(0.0, "[x=0]"), ((0.5,), (2.0,)), False),
        Case("categorical_p1", f["categorical3"], ParameterFunction.coordinate(0, "p1"),
             _indicator(1.0, "[x=1]"), ((1 / 3, 1 / 3), (0.2, 0.5), (0.6, 0.1)), True, True),
        Case("two_channel_mean", f["two_channel"], mu,
             Estimator.from_expression("(x1 + x2)/2", ["x1", "x2"]), ((0.0,), (1.0,)), False),
        Case("two_channel_weighted", f["two_channel"], mu,
             Estimator.from_expression("0.8*x1 + 0.2*x2", ["x1", "x2"]), ((0.0,), (1.0,)), True, True),
        Case("bernoulli_pair_mean", f["bernoulli_pair"], ParameterFunction.coordinate(0, "p"),
             Estimator.from_expression("(x1 + x2)/2", ["x1", "x2"]), ((0.3,), (0.6,)), True),
        Case("tabulated_bernoulli_p", f["tabulated_bernoulli"], ParameterFunction.coordinate(0, "p"),
             x, ((0.25,), (0.55,)), True),
    ]
