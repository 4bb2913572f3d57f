import numpy as np
import pytest

from mtmcmc.datasets import (
    Dataset,
    load_csv,
    sample_true_model,
    synth_generate,
    write_csv,
)
from mtmcmc.experiments import bernoulli_model
from mtmcmc.leafmodels import LeafModelSpec
from mtmcmc.model import ModelConfig
from mtmcmc.routing import FeatureSpace


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_roles_and_one_hot(tmp_path):
    path = write(tmp_path, (
        "age,sex,embarked,survived\n"
        "22,M,S,0\n"
        "38,F,C,1\n"
        "26,F,Q,1\n"
        "35,M,S,0\n"
    ))
    ds = load_csv(path, {"target": "survived", "continuous": ["age"],
                         "categorical": ["sex", "embarked"]})
    # two-level sex -> one column, three-level embarked -> three columns
    assert ds.p == 1 and ds.q == 4
    assert ds.feature_names == ["age", "sex=M", "embarked=C", "embarked=Q", "embarked=S"]
    np.testing.assert_array_equal(ds.X[:, 1], [1, 0, 0, 1])
    np.testing.assert_array_equal(ds.X[:, 2], [0, 1, 0, 0])
    assert ds.X.shape == (4, 5)
    assert ds.y.dtype == np.int64
    # one-hot rows sum to one across the expanded columns
    np.testing.assert_array_equal(ds.X[:, 2:].sum(axis=1), np.ones(4))


def test_load_csv_missing_values(tmp_path):
    path = write(tmp_path, (
        "age,sex,survived\n"
        "10,M,0\n"
        ",F,1\n"
        "30,?,1\n"
        "20,F,0\n"
    ))
    ds = load_csv(path, {"target": "survived", "continuous": ["age"],
                         "categorical": ["sex"]})
    assert ds.X[1, 0] == pytest.approx(20.0)  # median of 10, 30, 20
    assert ds.X[2, 1] == 0.0                  # mode "F" maps to level 0 of {F, M}


def test_load_csv_errors(tmp_path):
    path = write(tmp_path, "a,b,y\n1,x,0\n2,1,1\n")
    with pytest.raises(ValueError, match="unparseable value 'x' at row 0, column 'b'"):
        load_csv(path, {"target": "y", "continuous": ["a"], "binary": ["b"]},)
    path2 = write(tmp_path, "a,b,y\n1,0,0\n2,1,1\n", name="d2.csv")
    with pytest.raises(ValueError, match="no assigned role"):
        load_csv(path2, {"target": "y", "continuous": ["a"]})
    with pytest.raises(ValueError, match="not present"):
        load_csv(path2, {"target": "y", "continuous": ["a", "missing"], "binary": ["b"]})
    path3 = write(tmp_path, "a,y\n1,0\n2,1\n", name="d3.csv")
    with pytest.raises(ValueError, match="'target'"):
        load_csv(path3, {"continuous": ["a"]})
    path4 = write(tmp_path, "a,b,y\n1,2,0\n2,1,1\n", name="d4.csv")
    with pytest.raises(ValueError, match="other than 0/1"):
        load_csv(path4, {"target": "y", "continuous": ["a"], "binary": ["b"]})


def test_load_csv_ignore_and_string_target(tmp_path):
    path = write(tmp_path, "id,a,y\n7,1.5,no\n8,2.5,yes\n9,0.5,no\n")
    ds = load_csv(path, {"target": "y", "continuous": ["a"], "ignore": ["id"]})
    np.testing.assert_array_equal(ds.y, [0, 1, 0])  # sorted levels: no=0, yes=1


def test_csv_round_trip(tmp_path):
    model = bernoulli_model(2, 3)
    train, _, _ = synth_generate(model, 25, 5, model_seed=1, data_seed=2)
    path = tmp_path / "round.csv"
    write_csv(train, path)
    back = load_csv(path, {"target": "y", "binary": train.feature_names})
    np.testing.assert_allclose(back.X, train.X)
    np.testing.assert_array_equal(back.y, train.y)


def test_synth_determinism_and_generative_consistency():
    model = bernoulli_model(3, 4, 0.6)
    a_train, a_test, a_true = synth_generate(model, 50, 20, model_seed=3, data_seed=4)
    b_train, b_test, b_true = synth_generate(model, 50, 20, model_seed=3, data_seed=4)
    np.testing.assert_array_equal(a_train.X, b_train.X)
    np.testing.assert_array_equal(a_train.y, b_train.y)
    np.testing.assert_array_equal(a_true.k, b_true.k)
    assert a_true.tree == b_true.tree
    assert set(a_true.thetas) == set(a_true.tree.leaves)


def test_synth_zero_split_prior_gives_single_leaf():
    model = bernoulli_model(2, 2, g=0.0)
    _, _, true = synth_generate(model, 10, 5, model_seed=0, data_seed=0)
    assert true.tree.leaves == frozenset({0})
    assert not true.tree.inner


def test_synth_continuous_features_sample_initial_range():
    spec = LeafModelSpec("normal_normalgamma", dict(m=0.0, gamma=1.0, alpha=2.0, beta=1.0))
    space = FeatureSpace(p=1, q=1, lo=np.array([-4.0, 0.0]), hi=np.array([4.0, 1.0]))
    model = ModelConfig.create(2, 0.5, space, spec)
    train, _, _ = synth_generate(model, 200, 10, model_seed=5, data_seed=6)
    assert train.X[:, 0].min() >= -4.0 and train.X[:, 0].max() < 4.0
    assert set(np.unique(train.X[:, 1])) <= {0.0, 1.0}


def test_true_model_jsonable():
    model = bernoulli_model(2, 2)
    true = sample_true_model(model, np.random.default_rng(0))
    blob = true.to_jsonable()
    assert set(blob) == {"k", "inner_nodes", "leaf_nodes", "thetas"}
    assert len(blob["k"]) == model.num_inner


def test_dataset_validation():
    with pytest.raises(ValueError, match="row count"):
        Dataset(X=np.zeros((3, 2)), y=np.zeros(2), p=0, q=2)
    with pytest.raises(ValueError, match="p \\+ q"):
        Dataset(X=np.zeros((3, 2)), y=np.zeros(3), p=0, q=3)
