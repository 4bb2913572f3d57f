"""Exact posterior over all full subtrees for one fixed feature assignment.

For a fixed assignment the posterior over tree shapes factorizes node-wise
(same product form as the prior, with posterior split probabilities), so the
marginal likelihood, the posterior split probabilities, and the
tree-marginalized predictive all come out of one bottom-up pass over the
nodes touched by the data.  Everything here is O(n * d_max) per assignment
plus one O(2**d_max) vector pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .leafmodels import PredictiveDistribution
from .model import ModelConfig
from .routing import route
from .tree import FullSubtree


@dataclass
class MetaTreeState:
    """Per-node sufficient statistics and split posteriors for one assignment.

    Treated as immutable once built; samplers share references freely.
    """

    k: np.ndarray                    # (num_inner,) feature index per inner node
    stats: np.ndarray                # (num_nodes, stat_dim)
    point_count: np.ndarray          # (num_nodes,) training points through node
    log_node_marginal: np.ndarray    # m_s, log marginal of data routed through s
    log_subtree_marginal: np.ndarray  # L_s, stop-or-split mixture below s
    g_posterior: np.ndarray          # posterior split probability per node
    total_log_marginal: float        # L at the root = log p(y | x, k)

    @property
    def touched(self) -> np.ndarray:
        return self.point_count > 0

    def touched_count(self) -> int:
        return int(np.count_nonzero(self.point_count))


class MetaTreeBuilder:
    """Builds states for many assignments over one fixed dataset.

    Per-point stat rows do not depend on the assignment, so they are computed
    once; scratch buffers are reused by ``total()`` for enumeration loops.
    """

    def __init__(self, model: ModelConfig, X: np.ndarray, y: np.ndarray) -> None:
        self.model = model
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            X = X.reshape(0, model.n_features)
        self.X = model.space.validate_points(np.atleast_2d(X))
        self.y = np.asarray(y)
        if len(self.y) != self.X.shape[0]:
            raise ValueError("x/y row counts differ")
        leaf = model.leaf
        self.contrib = leaf.contributions(self.X if leaf.needs_x else None, self.y)
        self._stats = np.zeros((model.num_nodes, leaf.stat_dim))
        self._count = np.zeros(model.num_nodes, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def _core(self, k: np.ndarray, stats: np.ndarray, count: np.ndarray):
        md = self.model
        paths = kernels.route_paths(self.X, k, md.space.lo, md.space.hi, md.d_max)
        kernels.scatter_rows(paths, self.contrib, md.num_nodes, stats, count)
        m = np.asarray(md.leaf.log_marginal_rows(stats), dtype=float)
        L, g_post = kernels.split_weight_recursion(
            m, md.log_g, md.log_1mg, md.shape.g, md.d_max
        )
        untouched = count == 0
        L[untouched] = 0.0
        g_post[untouched] = md.shape.g[untouched]
        return m, L, g_post

    def build(self, k) -> MetaTreeState:
        k = self.model.validate_assignment(k)
        stats = np.zeros_like(self._stats)
        count = np.zeros_like(self._count)
        m, L, g_post = self._core(k, stats, count)
        return MetaTreeState(
            k=k, stats=stats, point_count=count, log_node_marginal=m,
            log_subtree_marginal=L, g_posterior=g_post,
            total_log_marginal=float(L[0]),
        )

    def total(self, k) -> float:
        """Marginal likelihood only, reusing scratch buffers."""
        _, L, _ = self._core(np.ascontiguousarray(k, dtype=np.int64),
                             self._stats, self._count)
        return float(L[0])


def build(X, y, k, model: ModelConfig) -> MetaTreeState:
    """One-shot state construction; see MetaTreeBuilder for repeated use."""
    return MetaTreeBuilder(model, X, y).build(k)


def sequential_update(state: MetaTreeState, x, y, model: ModelConfig) -> MetaTreeState:
    """Fold one observation into a state, returning a new state.

    Runs the leaf-up one-point recursion along the point's path: the node
    predictive mixes with the child subtree predictive through the current
    posterior split probability, the root value increments the total, and the
    split probabilities are reweighted by how much the split branch explained.
    """
    md = model
    x = np.asarray(x, dtype=float)
    path = route(x, state.k, md.space, md.d_max)
    stats = state.stats.copy()
    count = state.point_count.copy()
    m = state.log_node_marginal.copy()
    L = state.log_subtree_marginal.copy()
    g_post = state.g_posterior.copy()

    depth1 = md.d_max + 1
    log_f = np.empty(depth1)
    for d in range(depth1):
        log_f[d] = md.leaf.log_predictive(stats[path[d]], x, y)

    log_q = np.empty(depth1)
    log_q[-1] = log_f[-1]
    for d in range(md.d_max - 1, -1, -1):
        g = g_post[path[d]]
        stop = math.log1p(-g) + log_f[d] if g < 1.0 else -np.inf
        split = math.log(g) + log_q[d + 1] if g > 0.0 else -np.inf
        log_q[d] = np.logaddexp(stop, split)

    for d in range(md.d_max):
        s = path[d]
        g = g_post[s]
        if g > 0.0 and np.isfinite(log_q[d]):
            g_new = math.exp(math.log(g) + log_q[d + 1] - log_q[d])
            g_post[s] = min(1.0, g_new)

    row = md.leaf.contributions(
        x[None, :] if md.leaf.needs_x else None, np.asarray([y])
    )[0]
    stats[path] += row
    count[path] += 1
    m[path] += log_f
    L[path] += log_q

    return MetaTreeState(
        k=state.k, stats=stats, point_count=count, log_node_marginal=m,
        log_subtree_marginal=L, g_posterior=g_post,
        total_log_marginal=state.total_log_marginal + float(log_q[0]),
    )


def _mix_down(values: np.ndarray, g_path: np.ndarray, classes: bool) -> np.ndarray:
    """Collapse per-depth node values into the stop-or-split mixture seen
    from the root: values (..., depth+1, C) if ``classes`` else (..., depth+1),
    g_path (..., depth+1)."""
    if classes:
        out = values[..., -1, :]
        for d in range(g_path.shape[-1] - 2, -1, -1):
            g = g_path[..., d, None]
            out = (1.0 - g) * values[..., d, :] + g * out
    else:
        out = values[..., -1]
        for d in range(g_path.shape[-1] - 2, -1, -1):
            g = g_path[..., d]
            out = (1.0 - g) * values[..., d] + g * out
    return out


def predictive(state: MetaTreeState, x_new, model: ModelConfig) -> PredictiveDistribution:
    """Tree-marginalized posterior predictive at one point."""
    md = model
    x = np.asarray(x_new, dtype=float)
    path = route(x, state.k, md.space, md.d_max)
    stats_rows = state.stats[path]
    g_path = state.g_posterior[path]
    leaf = md.leaf
    if leaf.n_classes is not None:
        f = leaf.pred_probs_rows(stats_rows)              # (depth+1, C)
        probs = _mix_down(f, g_path, classes=True)
        mean = float(probs @ np.arange(leaf.n_classes))
        return PredictiveDistribution(
            mean=mean, probs=probs, log_pdf=lambda yy: float(np.log(probs[int(yy)]))
        )
    x_rows = np.repeat(x[None, :], md.d_max + 1, axis=0)
    means = leaf.pred_mean_rows(stats_rows, x_rows if leaf.needs_x else None)
    mean = float(_mix_down(np.asarray(means, dtype=float), g_path, classes=False))

    def log_pdf(yy: float) -> float:
        lp = leaf.pred_logpdf_rows(stats_rows, x_rows if leaf.needs_x else None,
                                   np.full(md.d_max + 1, float(yy)))
        return float(np.log(_mix_down(np.exp(lp), g_path, classes=False)))

    return PredictiveDistribution(mean=mean, log_pdf=log_pdf)


def predictive_probs_batch(state: MetaTreeState, X_new: np.ndarray,
                           model: ModelConfig) -> np.ndarray:
    """Class probabilities of the tree-marginalized predictive, (n, C)."""
    md = model
    X_new = md.space.validate_points(X_new)
    paths = kernels.route_paths(X_new, state.k, md.space.lo, md.space.hi, md.d_max)
    f = md.leaf.pred_probs_rows(state.stats[paths])      # (n, depth+1, C)
    return _mix_down(f, state.g_posterior[paths], classes=True)


def predictive_mean_batch(state: MetaTreeState, X_new: np.ndarray,
                          model: ModelConfig) -> np.ndarray:
    """Posterior predictive means of the tree mixture, (n,)."""
    md = model
    X_new = md.space.validate_points(X_new)
    paths = kernels.route_paths(X_new, state.k, md.space.lo, md.space.hi, md.d_max)
    stats_rows = state.stats[paths]
    if md.leaf.needs_x:
        x_rows = np.broadcast_to(X_new[:, None, :], paths.shape + (X_new.shape[1],))
        means = md.leaf.pred_mean_rows(stats_rows, x_rows)
    else:
        means = md.leaf.pred_mean_rows(stats_rows)
    return _mix_down(np.asarray(means, dtype=float), state.g_posterior[paths], classes=False)


def tree_log_posterior(state: MetaTreeState, tree: FullSubtree, model: ModelConfig) -> float:
    """log p(T | data, k): the prior product form with posterior splits."""
    inner = np.fromiter(tree.inner, dtype=np.int64, count=len(tree.inner))
    leaves = np.fromiter(tree.leaves, dtype=np.int64, count=len(tree.leaves))
    with np.errstate(divide="ignore"):
        return float(
            np.log(state.g_posterior[inner]).sum()
            + np.log1p(-state.g_posterior[leaves]).sum()
        )
