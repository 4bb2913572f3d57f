"""Exact enumeration over the whole assignment space, for desk-scale ground
truth: the exact assignment posterior, the exact decision rule, and the
Jensen-Shannon diagnostic between the exact posterior and a chain's
empirical distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import metatree, predictor
from .metatree import MetaTreeBuilder
from .model import ModelConfig

DEFAULT_ENUMERATION_CAP = 1_000_000


class EnumerationCapError(ValueError):
    pass


def assignment_space_size(model: ModelConfig) -> int:
    return model.n_features ** model.num_inner


def _check_cap(model: ModelConfig, cap: int) -> int:
    size = assignment_space_size(model)
    if size > cap:
        raise EnumerationCapError(
            f"assignment space has {size} elements, above the cap of {cap}"
        )
    return size


def assignment_radix(model: ModelConfig) -> np.ndarray:
    """Mixed-radix weights mapping an assignment vector to its index."""
    return model.n_features ** np.arange(model.num_inner, dtype=np.int64)


def encode_assignment(k: np.ndarray, radix: np.ndarray) -> int:
    return int(np.dot(k, radix))


def decode_assignment(index: int, model: ModelConfig) -> np.ndarray:
    nf = model.n_features
    out = np.empty(model.num_inner, dtype=np.int64)
    for i in range(model.num_inner):
        out[i] = index % nf
        index //= nf
    return out


@dataclass
class ExactPosterior:
    """p(k | data) tabulated over the full assignment space, indexed by the
    mixed-radix encoding of k."""

    log_weights: np.ndarray   # log p(y | x, k), unnormalized
    probs: np.ndarray
    log_evidence: float       # log p(y | x) under the uniform assignment prior
    model: ModelConfig

    def prob_of(self, k: np.ndarray) -> float:
        return float(self.probs[encode_assignment(k, assignment_radix(self.model))])

    @property
    def size(self) -> int:
        return len(self.probs)


def exact_k_posterior(X, y, model: ModelConfig,
                      cap: int = DEFAULT_ENUMERATION_CAP,
                      threads: int = 1) -> ExactPosterior:
    """Enumerate every assignment; the prior over assignments is uniform, so
    posterior weights are the per-assignment marginal likelihoods.

    With ``threads > 1`` the index range is split into contiguous shards that
    fill disjoint slices of the weight vector (the hot kernels release the
    GIL), so results are identical for any thread count.
    """
    size = _check_cap(model, cap)
    nf = model.n_features
    ni = model.num_inner
    log_w = np.empty(size)

    def fill(start: int, stop: int) -> None:
        builder = MetaTreeBuilder(model, X, y)  # own scratch buffers per shard
        k = decode_assignment(start, model)
        for idx in range(start, stop):
            log_w[idx] = builder.total(k)
            for pos in range(ni):  # increment the mixed-radix counter
                k[pos] += 1
                if k[pos] < nf:
                    break
                k[pos] = 0

    if threads > 1 and size >= 4 * threads:
        from concurrent.futures import ThreadPoolExecutor

        bounds = np.linspace(0, size, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda i: fill(bounds[i], bounds[i + 1]), range(threads)))
    else:
        fill(0, size)
    log_z = float(logsumexp(log_w))
    probs = np.exp(log_w - log_z)
    return ExactPosterior(
        log_weights=log_w, probs=probs,
        log_evidence=log_z - math.log(size), model=model,
    )


def exact_posterior_predictive(X, y, model: ModelConfig, X_new: np.ndarray,
                               cap: int = DEFAULT_ENUMERATION_CAP,
                               posterior: ExactPosterior | None = None):
    """Assignment-posterior mixture of the tree-marginalized predictives:
    (n, C) class probabilities or (n,) means."""
    if posterior is None:
        posterior = exact_k_posterior(X, y, model, cap)
    builder = MetaTreeBuilder(model, X, y)
    finite = model.leaf.n_classes is not None
    acc = None
    for idx in range(posterior.size):
        w = posterior.probs[idx]
        if w == 0.0:
            continue
        state = builder.build(decode_assignment(idx, model))
        if finite:
            vals = metatree.predictive_probs_batch(state, X_new, model)
        else:
            vals = metatree.predictive_mean_batch(state, X_new, model)
        acc = w * vals if acc is None else acc + w * vals
    return acc


def exact_bayes_predict(X, y, model: ModelConfig, X_new: np.ndarray, loss: str,
                        cap: int = DEFAULT_ENUMERATION_CAP,
                        posterior: ExactPosterior | None = None) -> np.ndarray:
    """The exact decision rule: argmax label (zero-one) or mean (squared) of
    the full posterior predictive mixture."""
    predictor._check_loss(model, loss)
    vals = exact_posterior_predictive(X, y, model, X_new, cap, posterior)
    if loss == "zero_one":
        return np.argmax(vals, axis=1)
    return vals


def empirical_counts(samples, model: ModelConfig) -> dict[int, int]:
    """Occurrences of each assignment among recorded samples (repeats of the
    current state after rejection included)."""
    radix = assignment_radix(model)
    counts: dict[int, int] = {}
    for k, _ in samples:
        idx = encode_assignment(k, radix)
        counts[idx] = counts.get(idx, 0) + 1
    return counts


def js_divergence(exact: ExactPosterior | np.ndarray, empirical) -> float:
    """Jensen-Shannon divergence (natural log) between the exact posterior
    and an empirical distribution, with the 0 log 0 = 0 convention.

    ``empirical`` is either a dense probability vector or a sparse
    {index: count} map; mass the chain never visited contributes
    p * log 2 through the mixture term.
    """
    p = exact.probs if isinstance(exact, ExactPosterior) else np.asarray(exact, float)
    if isinstance(empirical, dict):
        if not empirical:
            raise ValueError("empirical distribution is empty")
        idx = np.fromiter(empirical.keys(), dtype=np.int64, count=len(empirical))
        cnt = np.fromiter(empirical.values(), dtype=float, count=len(empirical))
        q_s = cnt / cnt.sum()
        p_s = p[idx]
    else:
        q = np.asarray(empirical, dtype=float)
        if q.shape != p.shape:
            raise ValueError("shape mismatch between distributions")
        support = q > 0.0
        q_s = q[support]
        p_s = p[support]
    r_s = 0.5 * (p_s + q_s)
    with np.errstate(divide="ignore", invalid="ignore"):
        term_p = np.where(p_s > 0.0, p_s * (np.log(p_s) - np.log(r_s)), 0.0).sum()
        term_q = np.where(q_s > 0.0, q_s * (np.log(q_s) - np.log(r_s)), 0.0).sum()
    missing = 1.0 - p_s.sum()  # exact mass where the empirical is zero
    term_p += max(0.0, missing) * math.log(2.0)
    return 0.5 * float(term_p) + 0.5 * float(term_q)
