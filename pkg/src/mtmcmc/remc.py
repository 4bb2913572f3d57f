"""Replica exchange over tempered copies of the assignment sampler.

Replica j targets the posterior raised to an inverse temperature beta_j
(beta rescales only the marginal-likelihood term of the acceptance; the
proposal correction is untouched).  Every ``exchange_period`` iterations a
few neighbor pairs attempt to swap whole states; only the beta = 1 replica
is recorded.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .mcmc import Chain, ChainResult, ProposalKind, rng_for_chain, rng_for_exchange
from .metatree import MetaTreeBuilder, MetaTreeState
from .model import ModelConfig


@dataclass(frozen=True)
class ReplicaConfig:
    betas: tuple[float, ...]
    exchange_period: int = 10
    attempts_per_period: int = 4

    def __post_init__(self) -> None:
        b = np.asarray(self.betas, dtype=float)
        if len(b) < 1:
            raise ValueError("need at least one replica")
        if b[-1] != 1.0:
            raise ValueError("the last inverse temperature must be 1")
        if np.any(b < 0.0) or np.any(np.diff(b) <= 0.0):
            raise ValueError("inverse temperatures must be strictly increasing in [0, 1]")
        if self.exchange_period < 1 or self.attempts_per_period < 1:
            raise ValueError("exchange settings must be positive")

    @property
    def n_replicas(self) -> int:
        return len(self.betas)

    @classmethod
    def linear(cls, n_replicas: int, exchange_period: int = 10,
               attempts_per_period: int = 4) -> "ReplicaConfig":
        """beta_j = j / J for j = 1..J (the last is exactly 1)."""
        if n_replicas < 1:
            raise ValueError("need at least one replica")
        betas = tuple((j + 1) / n_replicas for j in range(n_replicas))
        return cls(betas=betas, exchange_period=exchange_period,
                   attempts_per_period=attempts_per_period)


def exchange_log_prob(logm_lo: float, logm_hi: float, beta_lo: float,
                      beta_hi: float) -> float:
    """log probability of swapping neighbor replicas given their
    marginal likelihoods: min(0, (beta_hi - beta_lo) * (logm_lo - logm_hi))."""
    return min(0.0, (beta_hi - beta_lo) * (logm_lo - logm_hi))


def run_remc(X, y, model: ModelConfig, kind: ProposalKind, rconfig: ReplicaConfig,
             burn_in: int, t_end: int, seed: int = 0,
             accept_target: int | None = None, max_iterations: int | None = None,
             record_samples: bool = True, on_sample=None) -> ChainResult:
    """Run tempered replicas in lockstep, recording the beta = 1 chain.

    Chain j draws from its own seed-derived stream, so trajectories between
    exchanges do not depend on how many replicas run; with one replica the
    output is identical to ``run_chain`` under the same seed.
    """
    if accept_target is None and t_end < 1:
        raise ValueError("t_end must be at least 1")
    builder = MetaTreeBuilder(model, X, y)
    betas = rconfig.betas
    J = rconfig.n_replicas
    chains = [
        Chain(builder, kind, rng_for_chain(seed, j), beta=betas[j]) for j in range(J)
    ]
    ex_rng = rng_for_exchange(seed)
    top = chains[-1]

    trace: list[float] = []
    accepted_flags: list[bool] = []
    samples: list[tuple[np.ndarray, MetaTreeState]] = []
    accepts = 0
    proposals = 0
    if max_iterations is None:
        max_iterations = t_end if accept_target is None else max(t_end, 2000 * accept_target)

    def exchange_sweep() -> None:
        if J < 2:
            return
        for _ in range(rconfig.attempts_per_period):
            j = int(ex_rng.integers(J - 1))
            lp = exchange_log_prob(
                chains[j].meta.total_log_marginal,
                chains[j + 1].meta.total_log_marginal,
                betas[j], betas[j + 1],
            )
            if ex_rng.random() < math.exp(lp):
                chains[j].k, chains[j + 1].k = chains[j + 1].k, chains[j].k
                chains[j].meta, chains[j + 1].meta = chains[j + 1].meta, chains[j].meta

    start = time.perf_counter()
    iteration = 0
    for _ in range(burn_in):
        iteration += 1
        top_accepted = False
        for chain in chains:
            accepted = chain.step(tune=True)
            if chain is top:
                top_accepted = accepted
        if iteration % rconfig.exchange_period == 0:
            exchange_sweep()
        trace.append(top.meta.total_log_marginal)
        accepted_flags.append(top_accepted)
    for chain in chains:
        chain.freeze()

    while True:
        if accept_target is None:
            if proposals >= t_end:
                break
        elif accepts >= accept_target or proposals >= max_iterations:
            break
        iteration += 1
        top_accepted = False
        for chain in chains:
            accepted = chain.step()
            if chain is top:
                top_accepted = accepted
        if iteration % rconfig.exchange_period == 0:
            exchange_sweep()
        proposals += 1
        accepts += int(top_accepted)
        trace.append(top.meta.total_log_marginal)
        accepted_flags.append(top_accepted)
        if record_samples:
            samples.append((top.k, top.meta))
        if on_sample is not None:
            on_sample(proposals, top.k, top.meta, top_accepted)
    elapsed = time.perf_counter() - start

    total = burn_in + proposals
    return ChainResult(
        samples=samples,
        accept_count=accepts,
        propose_count=proposals,
        loglik_trace=np.asarray(trace),
        accepted_trace=np.asarray(accepted_flags, dtype=bool),
        burn_in=burn_in,
        tuned_param=top.frozen_param,
        seconds_per_iteration=elapsed / total if total else 0.0,
    )
