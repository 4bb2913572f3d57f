"""Reusable experiment drivers: posterior-convergence traces against the
exact posterior, acceptance-ratio comparisons across proposal kinds, and
per-iteration likelihood traces.

The benchmark generating trees (named A, B, and C) are binary-feature
Bernoulli models of increasing/contrasting structure: A is a balanced
depth-2 tree, B an unbalanced chain down the right spine, C a full depth-3
tree.  Leaf success rates sit well away from 1/2 so the data carry a clear
signal about the assignment.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .datasets import TrueModel, sample_inputs, sample_outputs
from .leafmodels import LeafModelSpec
from .mcmc import ChainResult, ProposalKind, run_chain
from .model import ModelConfig
from .routing import FeatureSpace
from .tree import FullSubtree

BERNOULLI_JEFFREYS = LeafModelSpec("bernoulli_beta", dict(alpha=0.5, beta=0.5))


def bernoulli_model(d_max: int, q: int, g: float = 0.5) -> ModelConfig:
    return ModelConfig.create(d_max, g, FeatureSpace.binary(q), BERNOULLI_JEFFREYS)


def _true(k: dict[int, int], inner: set[int], thetas: dict[int, float],
          model: ModelConfig) -> TrueModel:
    leaves = set(thetas)
    if max(inner, default=0) >= model.num_inner or max(leaves) >= model.num_nodes:
        raise ValueError("benchmark model does not fit: increase d_max")
    if max(k.values(), default=0) >= model.n_features:
        raise ValueError("benchmark model does not fit: increase q")
    kvec = np.zeros(model.num_inner, dtype=np.int64)
    for s, f in k.items():
        kvec[s] = f
    return TrueModel(k=kvec, tree=FullSubtree(inner=frozenset(inner),
                                              leaves=frozenset(leaves)),
                     thetas=dict(thetas))


def benchmark_true_model(name: str, model: ModelConfig) -> TrueModel:
    """Generating trees for the proposal-comparison benchmarks."""
    if name == "A":   # balanced depth-2 tree on three features
        return _true(
            k={0: 0, 1: 1, 2: 2}, inner={0, 1, 2},
            thetas={3: 0.1, 4: 0.9, 5: 0.8, 6: 0.2}, model=model,
        )
    if name == "B":   # unbalanced: splits hang off the right spine; sharp
        # leaves concentrate the posterior, starving blind uniform proposals
        return _true(
            k={0: 0, 2: 1, 6: 2}, inner={0, 2, 6},
            thetas={1: 0.05, 5: 0.95, 13: 0.1, 14: 0.9}, model=model,
        )
    if name == "C":   # full depth-3 tree
        thetas = {s: (0.15 if i % 2 == 0 else 0.85) for i, s in enumerate(range(7, 15))}
        return _true(
            k={0: 0, 1: 1, 2: 2, 3: 3, 4: 4, 5: 3, 6: 4}, inner=set(range(7)),
            thetas=thetas, model=model,
        )
    if name == "D":   # full depth-3 tree, near-deterministic leaves: the
        # posterior concentrates on a handful of assignments (multimodal)
        thetas = {s: (0.03 if i % 2 == 0 else 0.97) for i, s in enumerate(range(7, 15))}
        return _true(
            k={0: 0, 1: 1, 2: 2, 3: 3, 4: 4, 5: 1, 6: 0}, inner=set(range(7)),
            thetas=thetas, model=model,
        )
    raise ValueError(f"unknown benchmark model {name!r}")


def make_benchmark_data(name: str, model: ModelConfig, n: int, data_seed: int):
    true = benchmark_true_model(name, model)
    rng = np.random.default_rng(data_seed)
    X = sample_inputs(model, n, rng)
    y = sample_outputs(model, true, X, rng)
    return X, y, true


# ---------------------------------------------------------------------------
# convergence to the exact posterior


@dataclass
class ConvergenceTrace:
    kind: str
    dataset_index: int
    accepted: np.ndarray       # checkpoint positions, in accepted proposals
    js: np.ndarray             # Jensen-Shannon divergence at each checkpoint
    acceptance_ratio: float


def convergence_trace(X, y, model: ModelConfig, kind: ProposalKind, burn_in: int,
                      accept_target: int, seed: int,
                      checkpoints: np.ndarray,
                      exact: oracle.ExactPosterior) -> tuple[np.ndarray, np.ndarray, float]:
    """JS divergence between the running post-burn-in empirical distribution
    and the exact posterior, measured when the chain reaches each accepted
    count.  Every recorded iteration counts once, repeats included."""
    radix = oracle.assignment_radix(model)
    counts: dict[int, int] = {}
    js = np.full(len(checkpoints), np.nan)
    marks = {int(c): i for i, c in enumerate(checkpoints)}
    accepts_seen = 0

    def on_sample(_t, k, _state, accepted):
        nonlocal accepts_seen
        idx = oracle.encode_assignment(k, radix)
        counts[idx] = counts.get(idx, 0) + 1
        if accepted:
            accepts_seen += 1
            mark = marks.get(accepts_seen)
            if mark is not None:
                js[mark] = oracle.js_divergence(exact, counts)

    result = run_chain(X, y, model, kind, burn_in=burn_in, t_end=1,
                       seed=seed, accept_target=accept_target,
                       record_samples=False, on_sample=on_sample)
    return js, checkpoints.copy(), result.acceptance_ratio


@dataclass
class ConvergenceReport:
    checkpoints: np.ndarray
    traces: list[ConvergenceTrace]
    mean_js: dict[str, np.ndarray] = field(default_factory=dict)
    mean_acceptance: dict[str, float] = field(default_factory=dict)

    def finalize(self) -> "ConvergenceReport":
        kinds = {t.kind for t in self.traces}
        for kind in kinds:
            rows = [t.js for t in self.traces if t.kind == kind]
            self.mean_js[kind] = np.nanmean(np.stack(rows), axis=0)
            self.mean_acceptance[kind] = float(
                np.mean([t.acceptance_ratio for t in self.traces if t.kind == kind])
            )
        return self


def convergence_experiment(model: ModelConfig, true: TrueModel, n: int,
                           n_datasets: int, kinds: list[ProposalKind],
                           burn_in: int, accept_target: int, seed: int,
                           checkpoints=None, threads: int = 1) -> ConvergenceReport:
    """The exact-posterior convergence protocol: several datasets from one
    generating tree; for each, every proposal kind runs until the target
    number of accepted proposals, tracking JS divergence to the exact
    posterior of that dataset."""
    if checkpoints is None:
        step = max(1, accept_target // 20)
        checkpoints = np.unique(np.concatenate([
            np.arange(step, accept_target + 1, step), [100, accept_target]
        ]))
    checkpoints = np.asarray(sorted(int(c) for c in checkpoints if c <= accept_target))

    def one_dataset(d: int) -> list[ConvergenceTrace]:
        rng = np.random.default_rng(seed + 1000 * d)
        X = sample_inputs(model, n, rng)
        y = sample_outputs(model, true, X, rng)
        exact = oracle.exact_k_posterior(X, y, model, threads=1)
        out = []
        for kind in kinds:
            js, cps, acc = convergence_trace(
                X, y, model, kind, burn_in, accept_target,
                seed=seed + 1000 * d + 17, checkpoints=checkpoints, exact=exact,
            )
            out.append(ConvergenceTrace(
                kind=kind.variant, dataset_index=d, accepted=cps, js=js,
                acceptance_ratio=acc,
            ))
        return out

    traces: list[ConvergenceTrace] = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(one_dataset, range(n_datasets)):
                traces.extend(res)
    else:
        for d in range(n_datasets):
            traces.extend(one_dataset(d))
    return ConvergenceReport(checkpoints=checkpoints, traces=traces).finalize()


# ---------------------------------------------------------------------------
# acceptance-ratio comparison across proposal kinds


@dataclass
class AcceptanceTable:
    models: list[str]
    kinds: list[str]
    ratios: dict[tuple[str, str], float]   # (model, kind) -> ratio

    def rows(self):
        for m in self.models:
            yield m, {k: self.ratios[(m, k)] for k in self.kinds}


def proposal_comparison(model: ModelConfig, model_names: list[str], n: int,
                        kinds: list[ProposalKind], burn_in: int, t_end: int,
                        seed: int, n_datasets: int = 3) -> AcceptanceTable:
    """Mean post-burn-in acceptance ratio per (generating model, proposal
    kind), averaged over several data draws so one unlucky sample does not
    misrepresent a model."""
    sums: dict[tuple[str, str], float] = {}
    for mi, name in enumerate(model_names):
        for r in range(n_datasets):
            X, y, _ = make_benchmark_data(name, model, n,
                                          data_seed=seed + 101 * mi + r)
            for kind in kinds:
                res = run_chain(X, y, model, kind, burn_in=burn_in, t_end=t_end,
                                seed=seed + 31 * mi + 7 * r)
                key = (name, kind.variant)
                sums[key] = sums.get(key, 0.0) + res.acceptance_ratio
    ratios = {key: val / n_datasets for key, val in sums.items()}
    return AcceptanceTable(models=list(model_names),
                           kinds=[k.variant for k in kinds], ratios=ratios)


# ---------------------------------------------------------------------------
# likelihood traces


def learnable_synthetic(model: ModelConfig, n: int, seed: int,
                        leaf_range: tuple[int, int] = (4, 16)):
    """Prior-drawn generating tree conditioned on a learnable size.

    Unconditioned prior trees at deep caps are mostly either a bare root or so
    fine-grained that n points cannot see the structure; both give flat
    likelihood traces.  Rejection keeps the leaf count inside ``leaf_range``.
    """
    from .datasets import sample_true_model, sample_inputs, sample_outputs

    rng = np.random.default_rng(seed)
    while True:
        true = sample_true_model(model, rng)
        if leaf_range[0] <= len(true.tree.leaves) <= leaf_range[1]:
            break
    X = sample_inputs(model, n, rng)
    y = sample_outputs(model, true, X, rng)
    return X, y, true


def likelihood_trace(X, y, model: ModelConfig, kind: ProposalKind, burn_in: int,
                     t_end: int, seed: int) -> ChainResult:
    """Chain run whose per-iteration marginal likelihood is the deliverable."""
    return run_chain(X, y, model, kind, burn_in=burn_in, t_end=t_end, seed=seed,
                     record_samples=False)
