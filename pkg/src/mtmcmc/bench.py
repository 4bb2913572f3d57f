"""Timing comparison of the numba and numpy kernel backends.

Measures the full state build (route + scatter + recursion, the per-MCMC-
iteration cost) and the routing kernel alone, across training sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .leafmodels import LeafModelSpec
from .metatree import MetaTreeBuilder
from .model import ModelConfig
from .routing import FeatureSpace


@dataclass
class BenchRow:
    op: str
    backend: str
    n: int
    d_max: int
    micros_per_call: float


def _time_call(fn, repeats: int) -> float:
    fn()  # warm any compilation and caches
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e6


def run_benchmark(n_values=(500, 1000, 2000), d_max: int = 10, q: int = 10,
                  repeats: int = 30, seed: int = 0) -> list[BenchRow]:
    spec = LeafModelSpec("bernoulli_beta", dict(alpha=0.5, beta=0.5))
    model = ModelConfig.create(d_max, 0.75, FeatureSpace.binary(q), spec)
    rng = np.random.default_rng(seed)
    rows: list[BenchRow] = []
    previous = kernels.active_backend()
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            kernels.warmup()
            for n in n_values:
                X = rng.integers(0, 2, size=(n, q)).astype(float)
                y = rng.integers(0, 2, size=n)
                builder = MetaTreeBuilder(model, X, y)
                k = model.random_assignment(rng)
                rows.append(BenchRow(
                    op="state_build", backend=backend, n=n, d_max=d_max,
                    micros_per_call=_time_call(lambda: builder.total(k), repeats),
                ))
                rows.append(BenchRow(
                    op="route_paths", backend=backend, n=n, d_max=d_max,
                    micros_per_call=_time_call(
                        lambda: kernels.route_paths(X, k, model.space.lo,
                                                    model.space.hi, d_max),
                        repeats,
                    ),
                ))
    finally:
        kernels.set_backend(previous)
    return rows


def format_table(rows: list[BenchRow]) -> str:
    lines = [f"{'op':<12} {'backend':<8} {'n':>6} {'d_max':>5} {'us/call':>12}"]
    for r in rows:
        lines.append(
            f"{r.op:<12} {r.backend:<8} {r.n:>6} {r.d_max:>5} {r.micros_per_call:>12.1f}"
        )
    by_key: dict[tuple[str, int], dict[str, float]] = {}
    for r in rows:
        by_key.setdefault((r.op, r.n), {})[r.backend] = r.micros_per_call
    for (op, n), vals in sorted(by_key.items()):
        if "numba" in vals and "numpy" in vals and vals["numba"] > 0:
            lines.append(f"speedup {op} n={n}: {vals['numpy'] / vals['numba']:.1f}x")
    return "\n".join(lines)
