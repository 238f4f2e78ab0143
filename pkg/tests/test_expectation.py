import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbound import (DomainError, EXACT, ExpectationError, ExpectationMethod, expect, expect_pair,
                     make_bernoulli, make_gaussian, make_poisson, make_product)
from crbound.canonical import canonical_families
from crbound.expectation import MC_CHUNK, mc_draws
from crbound.model_space import probe_points

import oracles


def x0(X):
    return X[:, 0]


@pytest.mark.parametrize("name", list(canonical_families()))
def test_constant_one_integrates_to_one(name):
    fam = canonical_families()[name]
    for q in probe_points(fam):
        assert expect(lambda X: 1.0, fam, q) == pytest.approx(1.0, abs=1e-9)


def test_gaussian_mean():
    assert expect(x0, make_gaussian(), [1.5]) == pytest.approx(1.5, abs=1e-9)


def test_poisson_mean_matches_truncated_sum():
    expected = float(oracles.poisson_expect(lambda n: n, 2.0))
    assert expected == pytest.approx(2.0, abs=1e-30)
    assert expect(x0, make_poisson(), [2.0]) == pytest.approx(expected, abs=1e-9)


def test_gaussian_fourth_moment_matches_quadrature():
    got = expect(lambda X: X[:, 0] ** 4, make_gaussian(), [0.7])
    assert got == pytest.approx(float(oracles.gaussian_expect(lambda x: x**4, 0.7, 1)), rel=1e-10)


def test_expect_pair_constants():
    assert expect_pair(lambda X: 1.0, lambda X: 1.0, make_bernoulli(), [0.3]) == pytest.approx((1, 1, 1))


def test_expect_pair_bernoulli_idempotent():
    assert expect_pair(x0, x0, make_bernoulli(), [0.5]) == pytest.approx((0.5, 0.5, 0.5), abs=1e-15)


def test_expect_pair_gaussian_second_moment():
    second = float(oracles.gaussian_expect(lambda x: x * x, 0, 1))
    eg, eh, egh = expect_pair(x0, x0, make_gaussian(), [0.0])
    assert eg == pytest.approx(0.0, abs=1e-12)
    assert eh == pytest.approx(0.0, abs=1e-12)
    assert egh == pytest.approx(second, abs=1e-9)


def test_expect_pair_mc_uses_same_draws():
    m = ExpectationMethod.monte_carlo(5000, seed=3)
    fam = make_gaussian()
    eg, _, egg = expect_pair(x0, x0, fam, [0.0], m)
    assert eg == expect(x0, fam, [0.0], m)
    assert egg == expect(lambda X: X[:, 0] ** 2, fam, [0.0], m)


def test_out_of_domain_point():
    with pytest.raises(DomainError):
        expect(x0, make_bernoulli(), [1.2])


def test_exact_refused_on_oversized_product():
    fam = make_product([make_gaussian(nodes=101) for _ in range(5)])
    with pytest.raises(ExpectationError):
        expect(x0, fam, [0.0])
    assert abs(expect(x0, fam, [0.0], ExpectationMethod.monte_carlo(2000))) < 0.2


def test_integrand_shape_checked():
    with pytest.raises(ValueError):
        expect(lambda X: np.zeros(3), make_bernoulli(), [0.3])


@pytest.mark.parametrize("kwargs", [dict(kind="bogus"), dict(kind="mc", mc_samples=0),
                                    dict(kind="mc", seed=-1), dict(workers=0)])
def test_method_validation(kwargs):
    with pytest.raises(ValueError):
        ExpectationMethod(**kwargs)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), c1=st.floats(-2, 2), c2=st.floats(-2, 2),
       mu=st.floats(-3, 3))
def test_exact_expectation_is_linear(a, b, c1, c2, mu):
    fam = make_gaussian(nodes=401)

    def g(X):
        return np.sin(c1 * X[:, 0])

    def h(X):
        return X[:, 0] ** 2 + c2

    lhs = expect(lambda X: a * g(X) + b * h(X), fam, [mu])
    rhs = a * expect(g, fam, [mu]) + b * expect(h, fam, [mu])
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), p=st.floats(0.05, 0.95))
def test_exact_expectation_is_linear_discrete(a, b, p):
    fam = make_poisson()
    lhs = expect(lambda X: a * X[:, 0] + b * X[:, 0] ** 2, fam, [10 * p])
    rhs = a * expect(x0, fam, [10 * p]) + b * expect(lambda X: X[:, 0] ** 2, fam, [10 * p])
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_mc_repeatable_and_independent_of_workers():
    fam = canonical_families()["two_channel"]
    n = 5 * MC_CHUNK + 17
    ref = mc_draws(fam, [0.4], ExpectationMethod.monte_carlo(n, seed=11))
    for workers in (1, 2, 3, 8):
        again = mc_draws(fam, [0.4], ExpectationMethod.monte_carlo(n, seed=11, workers=workers))
        assert np.array_equal(ref, again)
    other = mc_draws(fam, [0.4], ExpectationMethod.monte_carlo(n, seed=12))
    assert not np.array_equal(ref, other)


def test_mc_prefix_property():
    # chunk substreams depend only on (seed, chunk index), so a shorter run is a prefix
    fam = make_gaussian()
    long = mc_draws(fam, [0.0], ExpectationMethod.monte_carlo(3 * MC_CHUNK, seed=5))
    short = mc_draws(fam, [0.0], ExpectationMethod.monte_carlo(MC_CHUNK + 10, seed=5))
    assert np.array_equal(long[: MC_CHUNK + 10], short)


STAT_CASES = [
    ("gaussian_mu", (0.5,), lambda X: X[:, 0]),
    ("gaussian_mu_sigma", (0.3, 1.2), lambda X: X[:, 0] ** 2),
    ("bernoulli", (0.3,), lambda X: X[:, 0]),
    ("poisson", (2.0,), lambda X: X[:, 0]),
    ("categorical3", (0.2, 0.5), lambda X: X[:, 0]),
    ("two_channel", (0.0,), lambda X: X[:, 0] * X[:, 1]),
    ("bernoulli_pair", (0.6,), lambda X: X[:, 0] + X[:, 1]),
    ("tabulated_bernoulli", (0.35,), lambda X: X[:, 0]),
]


@pytest.mark.parametrize("name, p, g", STAT_CASES, ids=[c[0] for c in STAT_CASES])
def test_mc_within_five_standard_errors(name, p, g):
    fam = canonical_families()[name]
    exact = expect(g, fam, p)
    n = 100_000
    hits = 0
    for seed in range(50):
        vals = g(mc_draws(fam, p, ExpectationMethod.monte_carlo(n, seed=seed)))
        if abs(vals.mean() - exact) <= 5 * vals.std(ddof=1) / np.sqrt(n):
            hits += 1
    assert hits / 50 >= 0.99
