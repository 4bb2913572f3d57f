import numpy as np
import pytest

from mtmcmc import metatree, predictor
from mtmcmc.leafmodels import LeafModelSpec
from mtmcmc.mcmc import ProposalKind, run_chain
from mtmcmc.model import ModelConfig
from mtmcmc.predictor import PosteriorEnsemble, evaluate, predict, predict_batch
from mtmcmc.routing import FeatureSpace
from mtmcmc.tree import num_nodes


def bern_model(d_max, q, g=0.5, alpha=0.5, beta=0.5):
    spec = LeafModelSpec("bernoulli_beta", dict(alpha=alpha, beta=beta))
    return ModelConfig.create(d_max, g, FeatureSpace.binary(q), spec)


def empty_state_ensemble(model):
    st = metatree.build(np.zeros((0, model.n_features)), np.array([], dtype=int),
                        np.zeros(model.num_inner, dtype=np.int64), model)
    return PosteriorEnsemble(samples=[(st.k, st)], model=model)


def test_argmax_decision():
    # asymmetric prior Beta(1.4, 0.6): prior predictive (0.3, 0.7)
    model = bern_model(1, 1, alpha=1.4, beta=0.6)
    ens = empty_state_ensemble(model)
    assert predict(ens, np.array([0.0]), "zero_one") == 1


def test_tie_breaks_to_smallest_label():
    model = bern_model(1, 1)  # symmetric prior: exactly (0.5, 0.5)
    ens = empty_state_ensemble(model)
    assert predict(ens, np.array([0.0]), "zero_one") == 0


def test_empty_ensemble_rejected():
    model = bern_model(1, 1)
    with pytest.raises(ValueError, match="at least one sample"):
        PosteriorEnsemble(samples=[], model=model)


def test_prediction_invariant_to_sample_order():
    model = bern_model(2, 2)
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, (30, 2)).astype(float)
    y = rng.integers(0, 2, 30)
    res = run_chain(X, y, model, ProposalKind("posterior_truncated", 0.75),
                    burn_in=20, t_end=50, seed=1)
    X_new = rng.integers(0, 2, (8, 2)).astype(float)
    fwd = predict_batch(PosteriorEnsemble(res.samples, model), X_new, "zero_one")
    rev = predict_batch(PosteriorEnsemble(res.samples[::-1], model), X_new, "zero_one")
    np.testing.assert_array_equal(fwd, rev)


def test_averaged_probs_normalized():
    model = bern_model(2, 2)
    rng = np.random.default_rng(2)
    X = rng.integers(0, 2, (25, 2)).astype(float)
    y = rng.integers(0, 2, 25)
    res = run_chain(X, y, model, ProposalKind("uniform"), burn_in=10, t_end=40, seed=3)
    ens = PosteriorEnsemble(res.samples, model)
    probs = predictor.averaged_probs(ens, rng.integers(0, 2, (10, 2)).astype(float))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(probs >= 0)


def test_single_sample_root_leaf_reduces_to_leaf_model():
    g = np.zeros(num_nodes(2))
    spec = LeafModelSpec("bernoulli_beta", dict(alpha=0.5, beta=0.5))
    model = ModelConfig.create(2, g, FeatureSpace.binary(2), spec)
    rng = np.random.default_rng(4)
    X = rng.integers(0, 2, (20, 2)).astype(float)
    y = (rng.random(20) < 0.8).astype(int)
    st = metatree.build(X, y, np.zeros(3, dtype=np.int64), model)
    ens = PosteriorEnsemble([(st.k, st)], model)
    leaf_probs = model.leaf.predictive(st.stats[0]).probs
    for x in ([0.0, 0.0], [1.0, 1.0]):
        got = predictor.averaged_probs(ens, np.array([x]))[0]
        np.testing.assert_allclose(got, leaf_probs, atol=1e-12)
        assert predict(ens, np.array(x), "zero_one") == int(np.argmax(leaf_probs))


def test_evaluate_zero_one():
    model = bern_model(1, 1, alpha=1.4, beta=0.6)  # always predicts 1
    ens = empty_state_ensemble(model)
    X = np.zeros((6, 1))
    rep = evaluate(ens, X, np.ones(6, dtype=int), "zero_one")
    assert rep.value == 0.0
    rep = evaluate(ens, X, np.array([0, 1, 0, 1, 0, 1]), "zero_one")
    assert rep.value == pytest.approx(0.5)
    assert rep.probs.shape == (6, 2)


def test_evaluate_squared_and_loss_gate():
    spec = LeafModelSpec("poisson_gamma", dict(alpha=2.0, beta=1.0))
    model = ModelConfig.create(1, 0.5, FeatureSpace.binary(1), spec)
    st = metatree.build(np.zeros((0, 1)), np.array([], dtype=int),
                        np.zeros(1, dtype=np.int64), model)
    ens = PosteriorEnsemble([(st.k, st)], model)
    X = np.zeros((4, 1))
    rep = evaluate(ens, X, np.array([2, 2, 2, 2]), "squared")
    assert rep.value == pytest.approx(0.0)  # prior mean alpha/beta = 2
    with pytest.raises(ValueError, match="finite label set"):
        evaluate(ens, X, np.array([2, 2, 2, 2]), "zero_one")
    with pytest.raises(ValueError, match="empty test"):
        evaluate(ens, np.zeros((0, 1)), np.array([], dtype=int), "squared")
    with pytest.raises(ValueError, match="unknown loss"):
        evaluate(ens, X, np.array([2, 2, 2, 2]), "absolute")
