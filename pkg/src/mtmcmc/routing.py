"""Deterministic midpoint-bisection routing of points to tree nodes.

Each inner node halves the current interval of its assigned feature at the
midpoint; thresholds are never learned, they follow from the initial ranges
and the feature assignment alone.  Binary features start from [0, 1) so the
first split is at 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import FullSubtree


@dataclass(frozen=True)
class FeatureSpace:
    """Counts of continuous and binary features plus their initial ranges."""

    p: int
    q: int
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise ValueError("need at least one feature")
        if lo.shape != (self.n_features,) or hi.shape != (self.n_features,):
            raise ValueError("ranges must cover every feature")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("initial ranges must be finite")
        if np.any(lo >= hi):
            raise ValueError("initial ranges need lo < hi")
        if self.q and not (
            np.all(lo[self.p:] == 0.0) and np.all(hi[self.p:] == 1.0)
        ):
            raise ValueError("binary features must have range [0, 1)")

    @property
    def n_features(self) -> int:
        return self.p + self.q

    @classmethod
    def binary(cls, q: int) -> "FeatureSpace":
        return cls(p=0, q=q, lo=np.zeros(q), hi=np.ones(q))

    @classmethod
    def from_data(cls, X: np.ndarray, p: int, q: int,
                  overrides: dict[int, tuple[float, float]] | None = None) -> "FeatureSpace":
        """Data-driven ranges for continuous features: [min - eps, max + eps)
        with eps = 1e-9 * (max - min + 1); binary features get [0, 1)."""
        lo = np.zeros(p + q)
        hi = np.ones(p + q)
        for j in range(p):
            col = np.asarray(X[:, j], dtype=float)
            cmin, cmax = float(col.min()), float(col.max())
            eps = 1e-9 * (cmax - cmin + 1.0)
            lo[j], hi[j] = cmin - eps, cmax + eps
        if overrides:
            for j, (a, b) in overrides.items():
                if not 0 <= j < p:
                    raise ValueError(f"range override for non-continuous feature {j}")
                lo[j], hi[j] = float(a), float(b)
        return cls(p=p, q=q, lo=lo, hi=hi)

    def validate_points(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        if not np.isfinite(X).all():
            raise ValueError("explanatory variables must be finite")
        if self.q and not np.isin(X[:, self.p:], (0.0, 1.0)).all():
            raise ValueError("binary coordinates must be 0 or 1")
        return X


def route(x: np.ndarray, k: np.ndarray, space: FeatureSpace, d_max: int) -> np.ndarray:
    """Root-to-bottom path of one point, as level-order node ids.

    Reference implementation kept independent of the batched kernels so the
    two can be checked against each other.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (space.n_features,):
        raise ValueError(f"expected {space.n_features} coordinates, got {x.shape}")
    lo = space.lo.copy()
    hi = space.hi.copy()
    path = np.empty(d_max + 1, dtype=np.int64)
    s = 0
    path[0] = 0
    for d in range(d_max):
        f = int(k[s])
        mid = 0.5 * (lo[f] + hi[f])
        if x[f] < mid:
            s = 2 * s + 1
            hi[f] = mid
        else:
            s = 2 * s + 2
            lo[f] = mid
        path[d + 1] = s
    return path


def leaf_of(x: np.ndarray, k: np.ndarray, tree: FullSubtree, space: FeatureSpace,
            d_max: int) -> int:
    """The unique leaf of ``tree`` that the point's path passes through."""
    return tree.leaf_containing(route(x, k, space, d_max))
