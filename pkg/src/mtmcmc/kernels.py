"""Hot numeric kernels with two interchangeable backends.

The per-iteration cost of the sampler is dominated by three array passes:
routing every training point down the tree for a candidate feature
assignment, scattering per-point sufficient-statistic rows onto the visited
nodes, and the bottom-up log-space split-weight recursion.  Each pass has a
numba ``@njit`` implementation and a pure-numpy one.

Backend selection: numba is used when importable unless the environment
variable ``MTMCMC_NUMBA`` is set to ``0``; ``set_backend()`` switches at
runtime and ``mtmcmc bench-kernels`` times one against the other.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

NEG_INF = -np.inf

# ---------------------------------------------------------------------------
# pure-numpy implementations


def _route_paths_np(X, k, lo0, hi0, d_max):
    n = X.shape[0]
    paths = np.empty((n, d_max + 1), dtype=np.int64)
    paths[:, 0] = 0
    if d_max == 0 or n == 0:
        return paths
    nodes = np.zeros(n, dtype=np.int64)
    lo = np.repeat(lo0[None, :], n, axis=0)
    hi = np.repeat(hi0[None, :], n, axis=0)
    rows = np.arange(n)
    for d in range(d_max):
        f = k[nodes]
        mid = 0.5 * (lo[rows, f] + hi[rows, f])
        right = X[rows, f] >= mid
        nodes = 2 * nodes + 1 + right
        lo[rows[right], f[right]] = mid[right]
        left = ~right
        hi[rows[left], f[left]] = mid[left]
        paths[:, d + 1] = nodes
    return paths


def _scatter_rows_np(paths, contrib, stats_out, count_out):
    flat = paths.ravel()
    np.add.at(count_out, flat, 1)
    depth1 = paths.shape[1]
    np.add.at(stats_out, flat, np.repeat(contrib, depth1, axis=0))
    return stats_out, count_out


def _split_weight_recursion_np(m, log_g, log_1mg, g_prior, d_max):
    L = m.copy()
    g_post = np.zeros_like(m)
    for d in range(d_max - 1, -1, -1):
        s = np.arange((1 << d) - 1, (1 << (d + 1)) - 1)
        stop_term = log_1mg[s] + m[s]
        split_term = log_g[s] + L[2 * s + 1] + L[2 * s + 2]
        L[s] = np.logaddexp(stop_term, split_term)
        with np.errstate(invalid="ignore"):
            gp = np.exp(split_term - L[s])
        g_post[s] = np.where(np.isfinite(L[s]), np.clip(gp, 0.0, 1.0), g_prior[s])
    return L, g_post


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily on first use)

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

if HAVE_NUMBA:

    @_njit(cache=True, nogil=True)
    def _route_paths_nb(X, k, lo0, hi0, d_max):
        n = X.shape[0]
        nf = lo0.shape[0]
        paths = np.empty((n, d_max + 1), dtype=np.int64)
        lo = np.empty(nf)
        hi = np.empty(nf)
        for i in range(n):
            for f in range(nf):
                lo[f] = lo0[f]
                hi[f] = hi0[f]
            s = 0
            paths[i, 0] = 0
            for d in range(d_max):
                f = k[s]
                mid = 0.5 * (lo[f] + hi[f])
                if X[i, f] < mid:
                    s = 2 * s + 1
                    hi[f] = mid
                else:
                    s = 2 * s + 2
                    lo[f] = mid
                paths[i, d + 1] = s
        return paths

    @_njit(cache=True, nogil=True)
    def _scatter_rows_nb(paths, contrib, stats_out, count_out):
        n, depth1 = paths.shape
        sd = contrib.shape[1]
        for i in range(n):
            for d in range(depth1):
                s = paths[i, d]
                count_out[s] += 1
                for j in range(sd):
                    stats_out[s, j] += contrib[i, j]
        return stats_out, count_out

    @_njit(cache=True, nogil=True)
    def _split_weight_recursion_nb(m, log_g, log_1mg, g_prior, d_max):
        n_inner = (1 << d_max) - 1
        L = m.copy()
        g_post = np.zeros_like(m)
        for s in range(n_inner - 1, -1, -1):
            a = log_1mg[s] + m[s]
            b = log_g[s] + L[2 * s + 1] + L[2 * s + 2]
            if a == NEG_INF:
                ls = b
            elif b == NEG_INF:
                ls = a
            elif a >= b:
                ls = a + math.log1p(math.exp(b - a))
            else:
                ls = b + math.log1p(math.exp(a - b))
            L[s] = ls
            if ls == NEG_INF:
                g_post[s] = g_prior[s]
            else:
                gp = math.exp(b - ls)
                g_post[s] = 1.0 if gp > 1.0 else gp
        return L, g_post


# ---------------------------------------------------------------------------
# backend plumbing

_BACKENDS = {"numpy": SimpleNamespace(
    name="numpy",
    route_paths=_route_paths_np,
    scatter_rows=_scatter_rows_np,
    split_weight_recursion=_split_weight_recursion_np,
)}
if HAVE_NUMBA:
    _BACKENDS["numba"] = SimpleNamespace(
        name="numba",
        route_paths=_route_paths_nb,
        scatter_rows=_scatter_rows_nb,
        split_weight_recursion=_split_weight_recursion_nb,
    )

_DEFAULT = "numba" if (HAVE_NUMBA and os.environ.get("MTMCMC_NUMBA", "1") != "0") else "numpy"
_active = _BACKENDS[_DEFAULT]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active.name


def get_backend(name: str) -> SimpleNamespace:
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    return _BACKENDS[name]


def set_backend(name: str) -> str:
    """Switch the active kernel implementations; returns the previous name."""
    global _active
    previous = _active.name
    _active = get_backend(name)
    return previous


def warmup(backend: str | None = None) -> None:
    """Trigger JIT compilation so timing runs do not pay for it."""
    impl = _active if backend is None else get_backend(backend)
    X = np.zeros((2, 2))
    X[1, 0] = 1.0
    k = np.zeros(1, dtype=np.int64)
    lo = np.zeros(2)
    hi = np.ones(2)
    paths = impl.route_paths(X, k, lo, hi, 1)
    stats = np.zeros((3, 2))
    count = np.zeros(3, dtype=np.int64)
    impl.scatter_rows(paths, np.ones((2, 2)), stats, count)
    m = np.zeros(3)
    lg = np.full(3, NEG_INF)
    lg[0] = math.log(0.5)
    l1 = np.zeros(3)
    l1[0] = math.log(0.5)
    impl.split_weight_recursion(m, lg, l1, np.zeros(3), 1)


# public entry points delegate to the active backend


def route_paths(X: np.ndarray, k: np.ndarray, lo0: np.ndarray, hi0: np.ndarray,
                d_max: int) -> np.ndarray:
    """Level-order node ids visited by each row of X, shape (n, d_max + 1).

    At node s the coordinate ``k[s]`` is compared against the midpoint of its
    current interval: strictly below goes left and halves the interval from
    above, otherwise right.  Points outside the initial box keep comparing
    against finite midpoints, which reproduces the unbounded boundary cells.
    """
    return _active.route_paths(X, k, lo0, hi0, d_max)


def scatter_rows(paths: np.ndarray, contrib: np.ndarray, num_nodes: int,
                 stats_out: np.ndarray | None = None,
                 count_out: np.ndarray | None = None):
    """Accumulate per-point stat rows onto every node of their paths."""
    if stats_out is None:
        stats_out = np.zeros((num_nodes, contrib.shape[1]))
        count_out = np.zeros(num_nodes, dtype=np.int64)
    else:
        stats_out[:] = 0.0
        count_out[:] = 0
    return _active.scatter_rows(paths, contrib, stats_out, count_out)


def split_weight_recursion(m: np.ndarray, log_g: np.ndarray, log_1mg: np.ndarray,
                           g_prior: np.ndarray, d_max: int):
    """Bottom-up mixture of stop-here vs split-further node evidence.

    L_s = logaddexp(log(1-g_s) + m_s, log(g_s) + L_left + L_right) with
    L = m at the depth cap; returns (L, posterior split probabilities).
    Nodes with no data keep L = 0 and their prior g, which also covers the
    degenerate L = -inf guard.
    """
    return _active.split_weight_recursion(m, log_g, log_1mg, g_prior, d_max)
