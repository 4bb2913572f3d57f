"""Bundle of the three model ingredients shared by every operation:
tree shape with split prior, feature space, and the leaf observation model."""

from __future__ import annotations

import numpy as np

from .leafmodels import LeafModel, LeafModelSpec
from .routing import FeatureSpace
from .tree import TreeShape


class ModelConfig:
    def __init__(self, shape: TreeShape, space: FeatureSpace, leaf: LeafModel) -> None:
        self.shape = shape
        self.space = space
        self.leaf = leaf
        self.log_g, self.log_1mg = shape.log_g()

    @property
    def d_max(self) -> int:
        return self.shape.d_max

    @property
    def n_features(self) -> int:
        return self.space.n_features

    @property
    def num_nodes(self) -> int:
        return self.shape.num_nodes

    @property
    def num_inner(self) -> int:
        return self.shape.num_inner

    @classmethod
    def create(cls, d_max: int, split_prior, space: FeatureSpace,
               leaf_spec: LeafModelSpec) -> "ModelConfig":
        shape = TreeShape(d_max, split_prior)
        leaf = leaf_spec.build(x_dim=space.n_features)
        return cls(shape, space, leaf)

    def random_assignment(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw over the feature-assignment space."""
        return rng.integers(0, self.n_features, size=self.num_inner, dtype=np.int64)

    def validate_assignment(self, k) -> np.ndarray:
        k = np.ascontiguousarray(k, dtype=np.int64)
        if k.shape != (self.num_inner,):
            raise ValueError(f"assignment must cover all {self.num_inner} inner nodes")
        if k.size and (k.min() < 0 or k.max() >= self.n_features):
            raise ValueError(f"feature indices must lie in [0, {self.n_features})")
        return k
