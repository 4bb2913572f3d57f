"""Perfect binary tree indexing, full-subtree enumeration, and the tree prior.

Nodes are numbered in level order: root is 0, the children of node ``s`` are
``2s + 1`` and ``2s + 2``.  For maximum depth ``d_max`` the tree has
``2**(d_max + 1) - 1`` nodes; ids below ``2**d_max - 1`` are inner nodes, the
rest are depth-``d_max`` leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ENUMERATION_DEPTH_CAP = 4  # subtree count is 1 + c**2 per level; 677 at depth 4


def num_nodes(d_max: int) -> int:
    return (1 << (d_max + 1)) - 1


def num_inner(d_max: int) -> int:
    return (1 << d_max) - 1


def depth_of(s: int) -> int:
    return int(s + 1).bit_length() - 1


def parent(s: int) -> int:
    if s == 0:
        raise ValueError("root has no parent")
    return (s - 1) // 2


def children(s: int, d_max: int) -> tuple[int, int]:
    """Left and right child of node ``s``; errors at the maximum depth."""
    if depth_of(s) >= d_max:
        raise ValueError(f"node {s} is at depth {d_max}: leaf has no children")
    return 2 * s + 1, 2 * s + 2


def level_slice(depth: int) -> slice:
    """Ids of all nodes at ``depth`` (contiguous in level order)."""
    return slice((1 << depth) - 1, (1 << (depth + 1)) - 1)


def node_depths(d_max: int) -> np.ndarray:
    """Depth of every node id, shape (num_nodes,)."""
    out = np.empty(num_nodes(d_max), dtype=np.int64)
    for d in range(d_max + 1):
        out[level_slice(d)] = d
    return out


class TreeShape:
    """Maximum depth plus the per-node split prior g_s.

    ``split_prior`` may be a scalar (applied to every inner node), a per-depth
    sequence of length ``d_max``, or a full per-node array.  Nodes at depth
    ``d_max`` always get g = 0 so trees cannot grow past the cap.
    """

    def __init__(self, d_max: int, split_prior) -> None:
        if d_max < 0:
            raise ValueError("d_max must be nonnegative")
        self.d_max = int(d_max)
        n = num_nodes(d_max)
        g = np.zeros(n)
        pr = np.asarray(split_prior, dtype=float)
        if pr.ndim == 0:
            g[: num_inner(d_max)] = float(pr)
        elif pr.shape == (d_max,):
            for d in range(d_max):
                g[level_slice(d)] = pr[d]
        elif pr.shape == (n,):
            g = pr.copy()
            g[num_inner(d_max):] = 0.0
        else:
            raise ValueError(
                f"split_prior must be scalar, per-depth ({d_max},) or per-node ({n},)"
            )
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("split probabilities must lie in [0, 1]")
        self.g = g

    @property
    def num_nodes(self) -> int:
        return num_nodes(self.d_max)

    @property
    def num_inner(self) -> int:
        return num_inner(self.d_max)

    def log_g(self) -> tuple[np.ndarray, np.ndarray]:
        """(log g, log(1 - g)) with -inf where the probability is 0 or 1."""
        with np.errstate(divide="ignore"):
            return np.log(self.g), np.log1p(-self.g)

    def __repr__(self) -> str:
        return f"TreeShape(d_max={self.d_max})"


@dataclass(frozen=True)
class FullSubtree:
    """A rooted subtree in which every inner node has both children."""

    inner: frozenset[int]
    leaves: frozenset[int]

    def __post_init__(self) -> None:
        if self.inner & self.leaves:
            raise ValueError("inner and leaf sets must be disjoint")
        if 0 not in self.inner and 0 not in self.leaves:
            raise ValueError("subtree must contain the root")

    @property
    def nodes(self) -> frozenset[int]:
        return self.inner | self.leaves

    def leaf_containing(self, path) -> int:
        """The unique node of a root-to-bottom path that is a leaf here."""
        for s in path:
            if int(s) in self.leaves:
                return int(s)
        raise ValueError("path does not meet any leaf of this subtree")


ROOT_ONLY = FullSubtree(inner=frozenset(), leaves=frozenset({0}))


def enumerate_full_subtrees(d_max: int) -> list[FullSubtree]:
    """All full subtrees of the depth-``d_max`` perfect tree, leaf-first order.

    Only intended for desk-scale verification: the count satisfies
    c(0) = 1, c(d+1) = 1 + c(d)**2, so it explodes quickly.
    """
    if d_max > ENUMERATION_DEPTH_CAP:
        raise ValueError(
            f"refusing to enumerate subtrees for d_max={d_max} > {ENUMERATION_DEPTH_CAP}"
        )

    def rec(s: int, depth: int) -> list[tuple[frozenset[int], frozenset[int]]]:
        alone = [(frozenset(), frozenset({s}))]
        if depth == d_max:
            return alone
        out = list(alone)
        left, right = 2 * s + 1, 2 * s + 2
        for il, ll in rec(left, depth + 1):
            for ir, lr in rec(right, depth + 1):
                out.append((il | ir | {s}, ll | lr))
        return out

    return [FullSubtree(inner=i, leaves=l) for i, l in rec(0, 0)]


def count_full_subtrees(d_max: int) -> int:
    c = 1
    for _ in range(d_max):
        c = 1 + c * c
    return c


def tree_log_prior(tree: FullSubtree, shape: TreeShape) -> float:
    """log p(T) = sum(log g_s, inner) + sum(log(1 - g_s), leaves).

    A zero split probability on an inner node yields -inf, which is a legal
    value (the tree simply has prior mass zero); depth-``d_max`` leaves
    contribute log(1 - 0) = 0.
    """
    log_g, log_1mg = shape.log_g()
    inner = np.fromiter(tree.inner, dtype=np.int64, count=len(tree.inner))
    leaves = np.fromiter(tree.leaves, dtype=np.int64, count=len(tree.leaves))
    return float(log_g[inner].sum() + log_1mg[leaves].sum())
