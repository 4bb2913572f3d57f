import os
import subprocess
import sys

import numpy as np
import pytest

from mtmcmc import kernels


def inputs(seed=0, n=40, nf=3, d_max=4):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, nf)).astype(float)
    k = rng.integers(0, nf, size=(1 << d_max) - 1).astype(np.int64)
    lo, hi = np.zeros(nf), np.ones(nf)
    return X, k, lo, hi, d_max


def test_both_backends_available_here():
    assert "numpy" in kernels.available_backends()
    assert "numba" in kernels.available_backends()


def test_backends_give_identical_routing_and_scatter():
    X, k, lo, hi, d_max = inputs()
    num_nodes = (1 << (d_max + 1)) - 1
    contrib = np.random.default_rng(1).normal(size=(len(X), 2))
    results = {}
    for name in kernels.available_backends():
        impl = kernels.get_backend(name)
        paths = impl.route_paths(X, k, lo, hi, d_max)
        stats = np.zeros((num_nodes, 2))
        count = np.zeros(num_nodes, dtype=np.int64)
        impl.scatter_rows(paths, contrib, stats, count)
        results[name] = (paths, stats, count)
    base = results["numpy"]
    for name, (paths, stats, count) in results.items():
        np.testing.assert_array_equal(paths, base[0], err_msg=name)
        np.testing.assert_allclose(stats, base[1], atol=1e-12, err_msg=name)
        np.testing.assert_array_equal(count, base[2], err_msg=name)


def test_backends_give_identical_recursion():
    rng = np.random.default_rng(2)
    d_max = 4
    num_nodes = (1 << (d_max + 1)) - 1
    num_inner = (1 << d_max) - 1
    g = np.zeros(num_nodes)
    g[:num_inner] = rng.uniform(0, 1, num_inner)
    with np.errstate(divide="ignore"):
        log_g, log_1mg = np.log(g), np.log1p(-g)
    m = np.where(rng.random(num_nodes) < 0.3, 0.0, -rng.exponential(5.0, num_nodes))
    outs = {}
    for name in kernels.available_backends():
        impl = kernels.get_backend(name)
        outs[name] = impl.split_weight_recursion(m, log_g, log_1mg, g, d_max)
    L_np, g_np = outs["numpy"]
    L_nb, g_nb = outs["numba"]
    np.testing.assert_allclose(L_nb, L_np, atol=1e-12)
    np.testing.assert_allclose(g_nb, g_np, atol=1e-12)


def test_recursion_handles_degenerate_probabilities():
    # g = 0 and g = 1 nodes, plus -inf node evidence
    d_max = 2
    num_nodes = 7
    g = np.array([1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0])
    with np.errstate(divide="ignore"):
        log_g, log_1mg = np.log(g), np.log1p(-g)
    m = np.zeros(num_nodes)
    m[1] = -np.inf
    for name in kernels.available_backends():
        impl = kernels.get_backend(name)
        L, g_post = impl.split_weight_recursion(m.copy(), log_g, log_1mg, g, d_max)
        assert L[1] == -np.inf         # forced leaf with impossible data
        assert g_post[1] == g[1]       # guard: prior for -inf evidence
        assert L[0] == -np.inf         # root must split into the -inf child
        assert g_post[0] == g[0]
        assert np.all((0.0 <= g_post) & (g_post <= 1.0))


def test_scatter_accumulates_counts():
    paths = np.array([[0, 1, 3], [0, 1, 4], [0, 2, 5]], dtype=np.int64)
    contrib = np.ones((3, 1))
    for name in kernels.available_backends():
        impl = kernels.get_backend(name)
        stats = np.zeros((7, 1))
        count = np.zeros(7, dtype=np.int64)
        impl.scatter_rows(paths, contrib, stats, count)
        np.testing.assert_array_equal(count, [3, 2, 1, 1, 1, 1, 0])
        np.testing.assert_allclose(stats[:, 0], [3, 2, 1, 1, 1, 1, 0])


def test_set_backend_round_trip():
    previous = kernels.active_backend()
    other = "numpy" if previous == "numba" else "numba"
    assert kernels.set_backend(other) == previous
    assert kernels.active_backend() == other
    kernels.set_backend(previous)
    with pytest.raises(ValueError, match="unknown backend"):
        kernels.get_backend("cuda")


def test_scatter_buffer_reuse_resets():
    X, k, lo, hi, d_max = inputs()
    paths = kernels.route_paths(X, k, lo, hi, d_max)
    contrib = np.ones((len(X), 1))
    stats, count = kernels.scatter_rows(paths, contrib, 31)
    stats2, count2 = kernels.scatter_rows(paths, contrib, 31, stats, count)
    assert stats2 is stats and count2 is count
    np.testing.assert_array_equal(count, count2)
    assert count.sum() == paths.size


def test_env_flag_selects_numpy_backend():
    code = (
        "import mtmcmc.kernels as k; "
        "print(k.active_backend())"
    )
    env = dict(os.environ, MTMCMC_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"
    env.pop("MTMCMC_NUMBA")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "numba"


def test_warmup_runs_on_both_backends():
    for name in kernels.available_backends():
        kernels.warmup(name)
