import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mtmcmc.leafmodels import (
    BernoulliBeta,
    CategoricalDirichlet,
    LeafModelSpec,
    LinRegNormalGamma,
    NormalNormalGamma,
    PoissonGamma,
    predictive_summary,
)


def build(family, **params):
    x_dim = params.pop("x_dim", 2)
    return LeafModelSpec(family, params).build(x_dim=x_dim)


ALL_SPECS = [
    ("bernoulli_beta", dict(alpha=0.5, beta=0.5)),
    ("categorical_dirichlet", dict(alphas=[0.5, 1.0, 2.0])),
    ("poisson_gamma", dict(alpha=1.0, beta=1.0)),
    ("normal_normalgamma", dict(m=0.5, gamma=2.0, alpha=2.0, beta=1.5)),
    ("linreg_normalgamma", dict(m=0.0, lam=1.0, alpha=2.0, beta=1.0)),
]


def sample_data(model, rng, n):
    if model.family == "bernoulli_beta":
        return None, rng.integers(0, 2, n)
    if model.family == "categorical_dirichlet":
        return None, rng.integers(0, model.n_classes, n)
    if model.family == "poisson_gamma":
        return None, rng.poisson(2.0, n)
    if model.family == "normal_normalgamma":
        return None, rng.normal(0.0, 1.5, n)
    X = rng.normal(0.0, 1.0, size=(n, 2))
    return X, X @ np.array([1.0, -0.5]) + rng.normal(0, 0.5, n)


# ---------------------------------------------------------------------------
# hand-checked values


def test_bernoulli_marginals():
    m = build("bernoulli_beta", alpha=0.5, beta=0.5)
    assert m.log_marginal(np.array([0.0, 1.0])) == pytest.approx(math.log(0.5))
    assert m.log_marginal(np.array([0.0, 2.0])) == pytest.approx(math.log(0.375))
    assert m.log_marginal(m.empty_stats()) == 0.0


def test_bernoulli_predictives():
    m = build("bernoulli_beta", alpha=0.5, beta=0.5)
    assert m.log_predictive(m.empty_stats(), None, 1) == pytest.approx(math.log(0.5))
    assert m.log_predictive(np.array([0.0, 1.0]), None, 1) == pytest.approx(math.log(0.75))
    np.testing.assert_allclose(m.predictive(m.empty_stats()).probs, [0.5, 0.5])


def test_poisson_marginal_at_zero_matches_quadrature():
    # analytic: integral of Po(0 | nu) Gam(nu | 1, 1) d nu = 1/2
    m = build("poisson_gamma", alpha=1.0, beta=1.0)
    got = m.log_marginal(m.update(m.empty_stats(), None, 0))
    assert got == pytest.approx(math.log(0.5), abs=1e-12)
    quad, _ = integrate.quad(lambda nu: stats.poisson.pmf(0, nu) * stats.gamma.pdf(nu, 1.0), 0, 60)
    assert got == pytest.approx(math.log(quad), abs=1e-8)


def test_poisson_marginal_general_quadrature():
    m = build("poisson_gamma", alpha=2.5, beta=1.5)
    ys = [1, 4, 0]
    s = m.empty_stats()
    for y in ys:
        s = m.update(s, None, y)

    def integrand(nu):
        val = stats.gamma.pdf(nu, 2.5, scale=1 / 1.5)
        for y in ys:
            val *= stats.poisson.pmf(y, nu)
        return val

    quad, _ = integrate.quad(integrand, 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert m.log_marginal(s) == pytest.approx(math.log(quad), abs=1e-8)


def test_poisson_posterior_mean():
    m = build("poisson_gamma", alpha=2.0, beta=3.0)
    s = m.empty_stats()
    for y in (1, 5, 2):
        s = m.update(s, None, y)
    assert m.predictive(s).mean == pytest.approx((2.0 + 8.0) / (3.0 + 3.0))


def test_normal_predictive_integrates_to_one():
    m = build("normal_normalgamma", m=0.3, gamma=2.0, alpha=1.5, beta=0.8)
    s = m.empty_stats()
    for y in (0.2, -1.0, 2.5):
        s = m.update(s, None, y)
    dist = m.predictive(s)
    total, _ = integrate.quad(lambda y: math.exp(dist.log_pdf(y)), -60, 60, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_normal_marginal_via_sequential_product():
    m = build("normal_normalgamma", m=0.0, gamma=1.0, alpha=2.0, beta=2.0)
    ys = [0.5, -0.25, 1.75]
    s = m.empty_stats()
    acc = 0.0
    for y in ys:
        acc += m.log_predictive(s, None, y)
        s = m.update(s, None, y)
    assert m.log_marginal(s) == pytest.approx(acc, abs=1e-10)


def test_linreg_predictive_integrates_to_one_and_mean_is_linear():
    m = build("linreg_normalgamma", m=0.0, lam=1.0, alpha=2.0, beta=1.0, x_dim=2)
    rng = np.random.default_rng(3)
    X = rng.normal(size=(8, 2))
    y = X @ np.array([1.0, -2.0]) + 0.3 + rng.normal(0, 0.4, 8)
    s = m.contributions(X, y).sum(axis=0)
    x_new = np.array([0.7, -0.2])
    dist = m.predictive(s, x_new)
    total, _ = integrate.quad(lambda v: math.exp(dist.log_pdf(v)), -80, 80, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)
    # closed-form posterior mean m_n' x
    Xa = np.concatenate([X, np.ones((8, 1))], axis=1)
    lam_n = np.eye(3) + Xa.T @ Xa
    m_n = np.linalg.solve(lam_n, Xa.T @ y)
    assert dist.mean == pytest.approx(m_n @ np.array([0.7, -0.2, 1.0]), rel=1e-10)


def test_linreg_hyperparameter_validation():
    with pytest.raises(ValueError, match="symmetric"):
        LinRegNormalGamma(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), 1.0, 1.0,
                          x_dim=2, intercept=False)
    with pytest.raises(ValueError, match="positive definite"):
        LinRegNormalGamma(np.zeros(2), -np.eye(2), 1.0, 1.0, x_dim=2, intercept=False)


def test_categorical_marginal_matches_sequential_product():
    m = build("categorical_dirichlet", alphas=[0.5, 1.0, 2.0])
    ys = [0, 2, 2, 1]
    s = m.empty_stats()
    acc = 0.0
    for y in ys:
        acc += m.log_predictive(s, None, y)
        s = m.update(s, None, y)
    assert m.log_marginal(s) == pytest.approx(acc, abs=1e-12)


# ---------------------------------------------------------------------------
# support validation and interface errors


def test_support_errors():
    bern = build("bernoulli_beta", alpha=0.5, beta=0.5)
    with pytest.raises(ValueError):
        bern.update(bern.empty_stats(), None, 2)
    pois = build("poisson_gamma", alpha=1.0, beta=1.0)
    with pytest.raises(ValueError):
        pois.update(pois.empty_stats(), None, -1)
    with pytest.raises(ValueError):
        pois.update(pois.empty_stats(), None, 1.5)
    cat = build("categorical_dirichlet", alphas=[1.0, 1.0])
    with pytest.raises(ValueError):
        cat.update(cat.empty_stats(), None, 5)


def test_hyperparameter_positivity():
    with pytest.raises(ValueError):
        BernoulliBeta(0.0, 1.0)
    with pytest.raises(ValueError):
        PoissonGamma(1.0, -1.0)
    with pytest.raises(ValueError):
        NormalNormalGamma(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        CategoricalDirichlet([1.0])


def test_predictive_summary_loss_gate():
    pois = build("poisson_gamma", alpha=1.0, beta=1.0)
    with pytest.raises(ValueError, match="finite label set"):
        predictive_summary(pois, pois.empty_stats(), None, "zero_one")
    out = predictive_summary(pois, pois.empty_stats(), None, "squared")
    assert out.mean == pytest.approx(1.0)
    bern = build("bernoulli_beta", alpha=0.5, beta=0.5)
    assert predictive_summary(bern, bern.empty_stats(), None, "zero_one").probs is not None
    with pytest.raises(ValueError, match="unknown loss"):
        predictive_summary(bern, bern.empty_stats(), None, "absolute")


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown leaf model family"):
        LeafModelSpec("gaussian_process", {}).build()


# ---------------------------------------------------------------------------
# properties shared by every family


@pytest.mark.parametrize("family,params", ALL_SPECS)
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_chain_rule_and_order_invariance(family, params, seed):
    model = build(family, **dict(params))
    rng = np.random.default_rng(seed)
    X, y = sample_data(model, rng, 6)
    contrib = model.contributions(X, y)
    batch = model.log_marginal(contrib.sum(axis=0))

    order = rng.permutation(len(y))
    s = model.empty_stats()
    acc = 0.0
    for i in order:
        xi = X[i] if X is not None else None
        acc += model.log_predictive(s, xi, y[i])
        s = model.update(s, xi, y[i])
    assert acc == pytest.approx(batch, abs=1e-9)
    assert model.log_marginal(s) == pytest.approx(batch, abs=1e-9)


@pytest.mark.parametrize("family,params", ALL_SPECS)
def test_empty_marginal_is_exactly_zero(family, params):
    model = build(family, **dict(params))
    assert model.log_marginal(model.empty_stats()) == 0.0


@pytest.mark.parametrize("family,params", ALL_SPECS)
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_update_downdate_identity(family, params, seed):
    model = build(family, **dict(params))
    rng = np.random.default_rng(seed)
    X, y = sample_data(model, rng, 4)
    s = model.empty_stats()
    for i in range(len(y)):
        s = model.update(s, X[i] if X is not None else None, y[i])
    before = s.copy()
    xi = X[2] if X is not None else None
    s2 = model.update(model.update(s, xi, y[2]), xi, y[2], remove=True)
    np.testing.assert_allclose(s2, before, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("family,params", ALL_SPECS[:2])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**6))
def test_finite_predictive_sums_to_one(family, params, seed):
    model = build(family, **dict(params))
    rng = np.random.default_rng(seed)
    _, y = sample_data(model, rng, 5)
    s = model.contributions(None, y).sum(axis=0)
    probs = model.predictive(s).probs
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(probs >= 0)
