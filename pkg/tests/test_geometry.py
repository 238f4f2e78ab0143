import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbound import (FamilyError, FisherMatrix, ParameterFunction, SingularInformation,
                     affine_chart, crb, fisher_matrix, gradient, identity_chart, log_odds_chart,
                     make_bernoulli, make_categorical, make_gaussian, make_poisson, metric_pair,
                     pullback, reparameterize)
from crbound.canonical import canonical_cases, canonical_families
from crbound.geometry import Chart, builtin_charts, log_chart
from crbound.model_space import probe_points

import oracles


@pytest.mark.parametrize("mu", [-2.0, 0.0, 3.0])
def test_gaussian_information_unit(mu):
    oracle = float(oracles.gaussian_expect(lambda x: (x - mu) ** 2, mu, 1))
    assert fisher_matrix(make_gaussian(), [mu]).entries[0, 0] == pytest.approx(oracle, abs=1e-8)


def test_gaussian_information_other_sigma():
    fam = make_gaussian(sigma=0.5)
    assert fisher_matrix(fam, [1.0]).entries[0, 0] == pytest.approx(4.0, abs=1e-8)


def test_bernoulli_information():
    assert fisher_matrix(make_bernoulli(), [0.5]).entries[0, 0] == pytest.approx(4.0, abs=1e-8)


def test_categorical_information_brute_force():
    p = np.array([1 / 3, 1 / 3])
    probs = [p[0], p[1], 1 - p.sum()]
    scores = [np.array([1 / p[0], 0]), np.array([0, 1 / p[1]]), -np.ones(2) / probs[2]]
    brute = sum(q * np.outer(s, s) for q, s in zip(probs, scores))
    F = fisher_matrix(make_categorical(3), p)
    assert F.entries == pytest.approx(brute, abs=1e-8)
    assert F.entries == pytest.approx(np.array([[6.0, 3.0], [3.0, 6.0]]), abs=1e-8)
    assert F.inverse == pytest.approx(np.array([[2, -1], [-1, 2]]) / 9, abs=1e-8)


def test_fisher_matrix_is_read_only():
    F = fisher_matrix(make_bernoulli(), [0.3])
    with pytest.raises(ValueError):
        F.entries[0, 0] = 1.0


def test_condition_estimate_reported():
    F = fisher_matrix(make_categorical(3), [1 / 3, 1 / 3])
    assert F.condition_estimate == pytest.approx(3.0, rel=1e-10)


@pytest.mark.parametrize("entries", [[[1.0, 1.0], [1.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]],
                                     [[0.0]], [[np.nan]], [[1.0, 0.0], [0.0, 1e-12]]])
def test_singular_information(entries):
    with pytest.raises(SingularInformation, match="at"):
        FisherMatrix.from_entries([0.1] * len(entries), entries)


def test_singular_information_names_point():
    with pytest.raises(SingularInformation) as info:
        FisherMatrix.from_entries([0.25, 0.5], [[1.0, 1.0], [1.0, 1.0]])
    assert "(0.25, 0.5)" in str(info.value)
    assert tuple(info.value.at) == (0.25, 0.5)


def test_degenerate_family_is_singular():
    # the density does not depend on the second coordinate
    base = make_gaussian()
    import dataclasses
    fam = dataclasses.replace(base, name="flat", coordinate_names=("mu", "nu"),
                              param_domain=((-5.0, 5.0), (0.0, 1.0)), reference_point=None,
                              log_density=lambda p, X: base.log_density(p[:1], X),
                              analytic_score=None, sampler=None)
    with pytest.raises(SingularInformation):
        fisher_matrix(fam, [0.0, 0.5])


def test_metric_pair_examples():
    fam = make_categorical(3)
    p = [0.2, 0.5]
    F = fisher_matrix(fam, p)
    for i in range(2):
        e = np.eye(2)[i]
        assert metric_pair(fam, p, e, e) == pytest.approx(F.entries[i, i], rel=1e-14)
    assert metric_pair(fam, p, [0.0, 0.0], [1.0, 2.0]) == 0.0
    assert metric_pair(make_gaussian(), [1.7], [1.0], [1.0]) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), vecs=st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_metric_is_bilinear(a, b, vecs):
    fam = make_gaussian(False, False, mu_range=(-2, 2), sigma_range=(0.75, 1.5), nodes=401)
    p = [0.3, 1.1]
    u, w, v = np.array(vecs[:2]), np.array(vecs[2:4]), np.array(vecs[4:])
    lhs = metric_pair(fam, p, a * u + b * w, v)
    rhs = a * metric_pair(fam, p, u, v) + b * metric_pair(fam, p, w, v)
    assert lhs == pytest.approx(rhs, abs=1e-8 * max(1.0, abs(lhs)))
    assert metric_pair(fam, p, u, v) == pytest.approx(metric_pair(fam, p, v, u), rel=1e-14, abs=1e-15)


def test_gradient_examples():
    F = fisher_matrix(make_gaussian(), [0.4])
    g = gradient(ParameterFunction.constant(2.5), F)
    assert np.all(g.components == 0) and g.squared_norm == 0.0
    g = gradient(ParameterFunction.coordinate(0), F)
    assert g.components == pytest.approx([1.0], abs=1e-8)
    assert g.squared_norm == pytest.approx(1.0, abs=1e-8)
    Fc = fisher_matrix(make_categorical(3), [1 / 3, 1 / 3])
    assert gradient(ParameterFunction.coordinate(0), Fc).squared_norm == pytest.approx(2 / 9, abs=1e-12)


def test_crb_examples():
    mu2 = ParameterFunction.from_expression("mu^2", ["mu"])
    assert crb(ParameterFunction.coordinate(0), make_gaussian(), [0.0]) == pytest.approx(1.0, abs=1e-8)
    assert crb(mu2, make_gaussian(), [1.5]) == pytest.approx(9.0, abs=1e-7)
    assert crb(ParameterFunction.coordinate(0), make_bernoulli(), [0.3]) == pytest.approx(0.21, abs=1e-8)


def test_expression_partials_match_analytic():
    theta = ParameterFunction.from_expression("exp(-lam)", ["lam"])
    assert theta.partials([2.0])[0] == pytest.approx(-np.exp(-2.0), rel=1e-9)


def test_expression_partials_respect_domain():
    theta = ParameterFunction.from_expression("log(p) - log(1 - p)", ["p"])
    d = theta.partials([1e-5 * 0.9], make_bernoulli())
    assert np.isfinite(d[0])


def test_identity_chart_leaves_information_unchanged():
    fam = make_categorical(3)
    chart = identity_chart(fam.coordinate_names)
    new = reparameterize(fam, chart)
    assert fisher_matrix(new, [0.2, 0.5]).entries == pytest.approx(
        fisher_matrix(fam, [0.2, 0.5]).entries, abs=1e-10)


def test_log_odds_bound_at_zero():
    new = reparameterize(make_bernoulli(), log_odds_chart())
    theta = pullback(ParameterFunction.coordinate(0, "p"), log_odds_chart())
    assert crb(theta, new, [0.0]) == pytest.approx(0.25, abs=1e-6)
    theta_expr = ParameterFunction.from_expression("1/(1 + exp(-logit_p))", ["logit_p"])
    assert crb(theta_expr, new, [0.0]) == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 2.0])
def test_scaling_chart(mu):
    chart = affine_chart(["nu"], 2.0, 0.0)
    new = reparameterize(make_gaussian(), chart)
    assert fisher_matrix(new, [2 * mu]).entries[0, 0] == pytest.approx(0.25, abs=1e-8)
    assert fisher_matrix(new.without_analytic_score(), [2 * mu]).entries[0, 0] == pytest.approx(0.25, abs=1e-7)


def test_non_invertible_chart_rejected():
    square = Chart(("s",), lambda p: p**2, lambda q: np.sqrt(q), label="square")
    with pytest.raises(FamilyError, match="not invertible"):
        reparameterize(make_gaussian(), square)


def test_singular_jacobian_rejected():
    fam = make_categorical(3)
    flat = Chart(("a", "b"), lambda p: p.copy(), lambda q: q.copy(),
                 lambda q: np.array([[1.0, 1.0], [1.0, 1.0]]), label="flat")
    with pytest.raises(FamilyError, match="singular Jacobian"):
        reparameterize(fam, flat)


def test_fd_jacobian_fallback():
    chart = Chart(("t",), lambda p: p**3, lambda q: np.cbrt(q), label="cube")
    assert chart.jacobian_at([8.0])[0, 0] == pytest.approx(1 / 12, rel=1e-8)


@pytest.mark.parametrize("name", list(canonical_families()))
def test_tensor_law_and_invariance(name):
    fam = canonical_families()[name]
    theta = ParameterFunction.coordinate(0)
    for chart in builtin_charts(fam):
        new = reparameterize(fam, chart)
        for phi in probe_points(fam, per_dim=3):
            psi = chart.to_new(phi)
            J = chart.jacobian_at(psi)
            I_phi = fisher_matrix(fam, phi).entries
            I_psi = fisher_matrix(new, psi).entries
            assert I_psi == pytest.approx(J.T @ I_phi @ J, abs=1e-6 * max(1.0, np.abs(I_psi).max()))
            b0 = crb(theta, fam, phi)
            assert crb(pullback(theta, chart), new, psi) == pytest.approx(b0, rel=1e-6)


def test_builtin_charts_cover_families():
    labels = lambda n: [c.label for c in builtin_charts(canonical_families()[n])]
    assert labels("bernoulli") == ["identity", "affine", "log-odds"]
    assert labels("poisson") == ["identity", "affine", "log"]
    assert labels("gaussian_mu") == ["identity", "affine"]
    assert labels("gaussian_mu_sigma") == ["identity", "affine", "log"]


def test_log_chart_partial():
    chart = log_chart(["mu", "sigma"], [1])
    assert chart.names == ("mu", "log_sigma")
    assert chart.to_old([0.5, 0.0]) == pytest.approx([0.5, 1.0])


@pytest.mark.parametrize("case", canonical_cases(), ids=lambda c: c.name)
def test_gradient_identity(case):
    for p in case.points:
        F = fisher_matrix(case.family, p)
        g = gradient(case.theta, F, case.family)
        assert g.squared_norm - g.dtheta_of_gradient == pytest.approx(0.0, abs=1e-8 * max(1.0, g.squared_norm))


@pytest.mark.parametrize("p", [(1 / 3, 1 / 3), (0.2, 0.5), (0.6, 0.1)])
def test_diagonal_specialization(p):
    fam = make_categorical(3)
    F = fisher_matrix(fam, p)
    for j in range(2):
        assert crb(ParameterFunction.coordinate(j), fam, p) == pytest.approx(F.inverse[j, j], abs=1e-10)
    closed = [p[0] * (1 - p[0]), p[1] * (1 - p[1])]
    assert np.diag(F.inverse) == pytest.approx(closed, abs=1e-10)


def test_poisson_information():
    for lam in (0.5, 2.0, 7.0):
        assert fisher_matrix(make_poisson(), [lam]).entries[0, 0] == pytest.approx(1 / lam, abs=1e-8)
