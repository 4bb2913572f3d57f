"""Metropolis-Hastings over feature-assignment vectors.

A proposal draws a "fixed tree" whose inner-node assignments are kept, then
refreshes everything else: leaves of the fixed tree that the training data
actually reaches are resampled away from their current feature, remaining
inner nodes are resampled uniformly.  The fixed tree is drawn from the
node-wise split posteriors of the current state (optionally truncated,
scaled, or interpolated toward the prior), so well-supported subtrees are
kept and poorly-supported ones are refreshed.  Because the fixed tree is
recoverable from the two assignments, the uniform resampling factors cancel
in the acceptance ratio and only the two tree factors remain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .metatree import MetaTreeBuilder, MetaTreeState
from .model import ModelConfig
from .tree import FullSubtree

PROPOSAL_VARIANTS = (
    "uniform",
    "prior_tree",
    "posterior_truncated",
    "posterior_reduced",
    "posterior_amplified",
)


@dataclass(frozen=True)
class ProposalKind:
    """Proposal family plus its knob (g-bar cap or alpha scale).

    ``param=None`` on a posterior variant means: tune it during burn-in.
    """

    variant: str
    param: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in PROPOSAL_VARIANTS:
            raise ValueError(f"unknown proposal variant {self.variant!r}")
        if self.param is not None:
            if not self.tunable:
                raise ValueError(f"{self.variant} takes no parameter")
            if not 0.0 <= self.param <= 1.0:
                raise ValueError("proposal parameter must lie in [0, 1]")

    @property
    def tunable(self) -> bool:
        return self.variant.startswith("posterior")

    @property
    def auto_tune(self) -> bool:
        return self.tunable and self.param is None


@dataclass(frozen=True)
class TunerState:
    """Burn-in tuning of the proposal knob toward a target acceptance rate.

    Counters are exponentially discounted proposal/acceptance tallies; the
    knob estimate is shrunk when the observed rate exceeds the target and
    grown toward 1 otherwise, then folded into a discounted running average.
    ``literal_update`` switches to the plain (phi*g + g_tmp)/N' form.
    """

    r_obj: float = 0.3
    rho: float = 0.99
    phi: float = 0.999
    g_hat: float = 0.5
    n_accept: float = 1.0
    n_propose: float = 1.0
    n_propose_avg: float = 1.0
    literal_update: bool = False


def tune_step(tuner: TunerState, accepted: bool) -> TunerState:
    n_accept = tuner.rho * tuner.n_accept + (1.0 if accepted else 0.0)
    n_propose = tuner.rho * tuner.n_propose + 1.0
    r_hat = n_accept / n_propose
    if r_hat > tuner.r_obj:
        g_tmp = tuner.g_hat * tuner.r_obj / r_hat
    elif r_hat >= 1.0:  # r_obj = 1 corner; keeps the division below defined
        g_tmp = tuner.g_hat * tuner.r_obj
    else:
        g_tmp = 1.0 - (1.0 - tuner.g_hat) * (1.0 - tuner.r_obj) / (1.0 - r_hat)
    n_avg = tuner.phi * tuner.n_propose_avg + 1.0
    if tuner.literal_update:
        g_hat = (tuner.phi * tuner.g_hat + g_tmp) / n_avg
    else:
        g_hat = (tuner.phi * tuner.g_hat * tuner.n_propose_avg + g_tmp) / n_avg
    return replace(
        tuner,
        g_hat=min(1.0, max(0.0, g_hat)),
        n_accept=n_accept,
        n_propose=n_propose,
        n_propose_avg=n_avg,
    )


@dataclass
class ProposalOutcome:
    """Candidate assignment plus the fixed tree it was generated through."""

    k_star: np.ndarray
    tilde_inner: np.ndarray
    tilde_leaves: np.ndarray
    log_q_forward_tree: float
    log_q_backward_tree: float | None = None

    @property
    def fixed_tree(self) -> FullSubtree:
        return FullSubtree(
            inner=frozenset(int(s) for s in self.tilde_inner),
            leaves=frozenset(int(s) for s in self.tilde_leaves),
        )


def proposal_split_probs(state: MetaTreeState, kind: ProposalKind, param: float | None,
                         model: ModelConfig) -> np.ndarray:
    """Per-node probability that the fixed tree splits at that node.

    Posterior variants are zeroed outside the inner nodes of the minimal tree
    reached by the training data, so the candidate never depends on (and the
    sampler never stores meaningfully) assignments the data cannot see.
    """
    if kind.variant == "uniform":
        raise ValueError("the uniform proposal has no fixed-tree distribution")
    if kind.variant == "prior_tree":
        return model.shape.g
    if param is None:
        raise ValueError(f"{kind.variant} needs its parameter resolved")
    ni = model.num_inner
    g_post = state.g_posterior[:ni]
    if kind.variant == "posterior_truncated":
        vals = np.minimum(g_post, param)
    elif kind.variant == "posterior_reduced":
        vals = param * g_post
    else:  # posterior_amplified
        g0 = model.shape.g[:ni]
        vals = g0 + param * (g_post - g0)
    out = np.zeros(model.num_nodes)
    touched_inner = state.point_count[:ni] > 0
    out[:ni][touched_inner] = vals[touched_inner]
    return out


def sample_fixed_tree(g_tilde: np.ndarray, d_max: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Top-down draw of the fixed tree: node s splits with probability
    g_tilde[s].  Returns (inner ids, leaf ids) in deterministic DFS order."""
    inner: list[int] = []
    leaves: list[int] = []
    stack = [0]
    limit = (1 << d_max) - 1
    while stack:
        s = stack.pop()
        if s < limit and rng.random() < g_tilde[s]:
            inner.append(s)
            stack.append(2 * s + 2)
            stack.append(2 * s + 1)
        else:
            leaves.append(s)
    return np.asarray(inner, dtype=np.int64), np.asarray(leaves, dtype=np.int64)


def fixed_tree_log_prob(g_tilde: np.ndarray, inner: np.ndarray,
                        leaves: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        total = 0.0
        if len(inner):
            total += float(np.log(g_tilde[inner]).sum())
        if len(leaves):
            total += float(np.log1p(-g_tilde[leaves]).sum())
    return total


def _resample_exclusion_ids(state: MetaTreeState, kind: ProposalKind,
                            leaves: np.ndarray, model: ModelConfig) -> np.ndarray:
    """Fixed-tree leaves whose assignment must move away from its current
    value: data-reached inner nodes (posterior variants) or any inner node
    (prior variant)."""
    cand = leaves[leaves < model.num_inner]
    if kind.variant == "prior_tree":
        return np.sort(cand)
    return np.sort(cand[state.point_count[cand] > 0])


def propose(state: MetaTreeState, kind: ProposalKind, param: float | None,
            model: ModelConfig, rng: np.random.Generator) -> ProposalOutcome:
    nf = model.n_features
    if kind.variant == "uniform":
        k_star = rng.integers(0, nf, size=model.num_inner, dtype=np.int64)
        return ProposalOutcome(
            k_star=k_star,
            tilde_inner=np.empty(0, dtype=np.int64),
            tilde_leaves=np.asarray([0], dtype=np.int64),
            log_q_forward_tree=0.0,
            log_q_backward_tree=0.0,
        )

    g_tilde = proposal_split_probs(state, kind, param, model)
    inner, leaves = sample_fixed_tree(g_tilde, model.d_max, rng)
    log_q_fwd = fixed_tree_log_prob(g_tilde, inner, leaves)

    k_star = state.k.copy()
    excl = _resample_exclusion_ids(state, kind, leaves, model)
    if len(excl) and nf == 1:
        raise ValueError("cannot exclude the only feature when resampling")
    for s in excl:
        j = int(rng.integers(nf - 1))
        k_star[s] = j + (j >= k_star[s])

    keep = np.zeros(model.num_inner, dtype=bool)
    keep[inner] = True
    keep[excl] = True
    rest = np.nonzero(~keep)[0]
    if len(rest):
        k_star[rest] = rng.integers(0, nf, size=len(rest), dtype=np.int64)

    return ProposalOutcome(
        k_star=k_star, tilde_inner=inner, tilde_leaves=leaves,
        log_q_forward_tree=log_q_fwd,
    )


def log_acceptance(meta_current: MetaTreeState, outcome: ProposalOutcome,
                   meta_star: MetaTreeState, kind: ProposalKind,
                   param: float | None, model: ModelConfig,
                   beta: float = 1.0) -> float:
    """log acceptance probability, min(0, delta).

    The uniform-resampling factors are identical in both directions (the
    fixed tree pins down matching node sets), so delta needs only the two
    marginal likelihoods and, for posterior variants, the forward/backward
    fixed-tree factors.  For the uniform and prior variants the proposal is
    symmetric and the tree factors drop entirely.
    """
    delta = beta * (meta_star.total_log_marginal - meta_current.total_log_marginal)
    if kind.variant in ("uniform", "prior_tree"):
        outcome.log_q_backward_tree = outcome.log_q_forward_tree
    else:
        g_tilde_star = proposal_split_probs(meta_star, kind, param, model)
        back = fixed_tree_log_prob(g_tilde_star, outcome.tilde_inner, outcome.tilde_leaves)
        outcome.log_q_backward_tree = back
        delta += back - outcome.log_q_forward_tree
    if math.isnan(delta):
        return -math.inf
    return min(0.0, delta)


# ---------------------------------------------------------------------------
# chain execution


def rng_for_chain(seed: int, index: int) -> np.random.Generator:
    """Stream for one chain; independent of how many replicas run."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, index)))


def rng_for_exchange(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, 0)))


@dataclass
class ChainResult:
    """Recorded post-burn-in samples plus run diagnostics."""

    samples: list[tuple[np.ndarray, MetaTreeState]]
    accept_count: int
    propose_count: int
    loglik_trace: np.ndarray
    accepted_trace: np.ndarray
    burn_in: int
    tuned_param: float | None
    seconds_per_iteration: float

    @property
    def acceptance_ratio(self) -> float:
        return self.accept_count / self.propose_count if self.propose_count else 0.0


class Chain:
    """One MH chain at inverse temperature beta over a fixed dataset."""

    def __init__(self, builder: MetaTreeBuilder, kind: ProposalKind,
                 rng: np.random.Generator, beta: float = 1.0,
                 tuner: TunerState | None = None) -> None:
        self.builder = builder
        self.model = builder.model
        self.kind = kind
        self.rng = rng
        self.beta = float(beta)
        self.tuner = tuner if kind.auto_tune else None
        if kind.auto_tune and tuner is None:
            self.tuner = TunerState()
        self.k = self.model.random_assignment(rng)
        self.meta = builder.build(self.k)
        self.frozen_param = kind.param

    @property
    def param(self) -> float | None:
        if self.kind.auto_tune and self.frozen_param is None:
            return self.tuner.g_hat
        return self.frozen_param

    def freeze(self) -> None:
        """Stop tuning: later proposals all use the current knob value."""
        if self.kind.auto_tune and self.frozen_param is None:
            self.frozen_param = self.tuner.g_hat

    def step(self, tune: bool = False) -> bool:
        outcome = propose(self.meta, self.kind, self.param, self.model, self.rng)
        meta_star = self.builder.build(outcome.k_star)
        la = log_acceptance(self.meta, outcome, meta_star, self.kind, self.param,
                            self.model, self.beta)
        accepted = self.rng.random() < math.exp(la)
        if accepted:
            self.k = outcome.k_star
            self.meta = meta_star
        if tune and self.tuner is not None:
            self.tuner = tune_step(self.tuner, accepted)
        return accepted


def run_chain(X, y, model: ModelConfig, kind: ProposalKind, burn_in: int,
              t_end: int, seed: int = 0, rng: np.random.Generator | None = None,
              accept_target: int | None = None, max_iterations: int | None = None,
              record_samples: bool = True, on_sample=None) -> ChainResult:
    """Run one MH chain and record every post-burn-in state.

    The initial assignment is uniform on the assignment space.  Rejected
    iterations record the repeated current state, so sample averages are the
    standard MH estimator.  With ``accept_target`` set, iteration continues
    past ``t_end`` until that many post-burn-in proposals were accepted.
    """
    if accept_target is None and t_end < 1:
        raise ValueError("t_end must be at least 1")
    builder = MetaTreeBuilder(model, X, y)
    if rng is None:
        rng = rng_for_chain(seed, 0)
    chain = Chain(builder, kind, rng)

    trace: list[float] = []
    accepted_flags: list[bool] = []
    start = time.perf_counter()
    for _ in range(burn_in):
        accepted_flags.append(chain.step(tune=True))
        trace.append(chain.meta.total_log_marginal)
    chain.freeze()

    samples: list[tuple[np.ndarray, MetaTreeState]] = []
    accepts = 0
    proposals = 0
    if max_iterations is None:
        max_iterations = t_end if accept_target is None else max(t_end, 2000 * accept_target)
    while True:
        if accept_target is None:
            if proposals >= t_end:
                break
        elif accepts >= accept_target or proposals >= max_iterations:
            break
        accepted = chain.step()
        proposals += 1
        accepts += int(accepted)
        trace.append(chain.meta.total_log_marginal)
        accepted_flags.append(accepted)
        if record_samples:
            samples.append((chain.k, chain.meta))
        if on_sample is not None:
            on_sample(proposals, chain.k, chain.meta, accepted)
    elapsed = time.perf_counter() - start

    total_iters = burn_in + proposals
    return ChainResult(
        samples=samples,
        accept_count=accepts,
        propose_count=proposals,
        loglik_trace=np.asarray(trace),
        accepted_trace=np.asarray(accepted_flags, dtype=bool),
        burn_in=burn_in,
        tuned_param=chain.frozen_param,
        seconds_per_iteration=elapsed / total_iters if total_iters else 0.0,
    )
