import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtmcmc.tree import (
    ROOT_ONLY,
    FullSubtree,
    TreeShape,
    children,
    count_full_subtrees,
    depth_of,
    enumerate_full_subtrees,
    node_depths,
    num_inner,
    num_nodes,
    parent,
    tree_log_prior,
)


def test_children_level_order():
    assert children(0, 3) == (1, 2)
    assert children(1, 3) == (3, 4)
    assert children(2, 3) == (5, 6)


def test_children_errors_at_depth_cap():
    with pytest.raises(ValueError, match="leaf has no children"):
        children(3, 2)  # node 3 sits at depth 2


@given(st.integers(min_value=0, max_value=2**14 - 2))
def test_parent_child_roundtrip(s):
    left, right = children(s, 20)
    assert parent(left) == s
    assert parent(right) == s
    assert depth_of(left) == depth_of(s) + 1


def test_node_depths():
    assert node_depths(2).tolist() == [0, 1, 1, 2, 2, 2, 2]
    assert num_nodes(2) == 7
    assert num_inner(2) == 3


@pytest.mark.parametrize("d,count", [(0, 1), (1, 2), (2, 5), (3, 26), (4, 677)])
def test_enumeration_counts(d, count):
    trees = enumerate_full_subtrees(d)
    assert len(trees) == count
    assert count_full_subtrees(d) == count
    assert len({(t.inner, t.leaves) for t in trees}) == count  # no duplicates


def test_enumeration_refuses_large_depth():
    with pytest.raises(ValueError, match="refusing"):
        enumerate_full_subtrees(5)


def test_enumeration_deterministic_leaf_first():
    trees = enumerate_full_subtrees(2)
    assert trees[0] == ROOT_ONLY
    assert trees == enumerate_full_subtrees(2)


def test_enumeration_trees_are_full():
    for t in enumerate_full_subtrees(3):
        for s in t.inner:
            l, r = children(s, 3)
            assert l in t.nodes and r in t.nodes
        assert 0 in t.nodes


def test_prior_examples():
    shape = TreeShape(2, 0.5)
    assert tree_log_prior(ROOT_ONLY, shape) == pytest.approx(np.log(0.5))
    two_leaves = FullSubtree(inner=frozenset({0}), leaves=frozenset({1, 2}))
    assert tree_log_prior(two_leaves, shape) == pytest.approx(np.log(0.125))


def test_prior_zero_split_gives_neg_inf():
    g = np.zeros(num_nodes(2))
    shape = TreeShape(2, g)
    two_leaves = FullSubtree(inner=frozenset({0}), leaves=frozenset({1, 2}))
    assert tree_log_prior(two_leaves, shape) == -np.inf
    assert tree_log_prior(ROOT_ONLY, shape) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=10**6))
def test_prior_normalizes(d_max, seed):
    rng = np.random.default_rng(seed)
    g = np.zeros(num_nodes(d_max))
    g[: num_inner(d_max)] = rng.uniform(0.0, 1.0, num_inner(d_max))
    shape = TreeShape(d_max, g)
    total = sum(np.exp(tree_log_prior(t, shape)) for t in enumerate_full_subtrees(d_max))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_shape_validation():
    with pytest.raises(ValueError):
        TreeShape(2, 1.5)
    with pytest.raises(ValueError):
        TreeShape(-1, 0.5)
    per_depth = TreeShape(2, [0.9, 0.3])
    assert per_depth.g[0] == 0.9
    assert per_depth.g[1] == per_depth.g[2] == 0.3
    assert np.all(per_depth.g[3:] == 0.0)


def test_shape_forces_zero_at_max_depth():
    shape = TreeShape(2, np.full(num_nodes(2), 0.7))
    assert np.all(shape.g[num_inner(2):] == 0.0)


def test_subtree_requires_root():
    with pytest.raises(ValueError):
        FullSubtree(inner=frozenset(), leaves=frozenset({1}))
