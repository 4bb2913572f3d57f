"""Decision rules over an ensemble of sampled assignments.

Per-sample tree-marginalized predictives are averaged across the recorded
chain states; zero-one loss picks the argmax label (ties to the smallest
label), squared loss reports the averaged predictive mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metatree
from .metatree import MetaTreeState
from .model import ModelConfig


@dataclass
class PosteriorEnsemble:
    samples: list[tuple[np.ndarray, MetaTreeState]]
    model: ModelConfig

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("ensemble must contain at least one sample")

    def __len__(self) -> int:
        return len(self.samples)


def _check_loss(model: ModelConfig, loss: str) -> None:
    if loss not in ("zero_one", "squared"):
        raise ValueError(f"unknown loss {loss!r}")
    if loss == "zero_one" and model.leaf.n_classes is None:
        raise ValueError(
            f"zero_one loss needs a finite label set, not {model.leaf.family}"
        )


def averaged_probs(ens: PosteriorEnsemble, X_new: np.ndarray) -> np.ndarray:
    """Ensemble-averaged class probabilities, shape (n, C).

    States repeated by rejection appear once per recorded iteration, which is
    exactly the MH estimator weighting.
    """
    model = ens.model
    acc = None
    for _, state in ens.samples:
        probs = metatree.predictive_probs_batch(state, X_new, model)
        acc = probs if acc is None else acc + probs
    return acc / len(ens.samples)


def averaged_means(ens: PosteriorEnsemble, X_new: np.ndarray) -> np.ndarray:
    model = ens.model
    acc = None
    for _, state in ens.samples:
        means = metatree.predictive_mean_batch(state, X_new, model)
        acc = means if acc is None else acc + means
    return acc / len(ens.samples)


def predict_batch(ens: PosteriorEnsemble, X_new: np.ndarray, loss: str) -> np.ndarray:
    _check_loss(ens.model, loss)
    if loss == "zero_one":
        return np.argmax(averaged_probs(ens, X_new), axis=1)
    return averaged_means(ens, X_new)


def predict(ens: PosteriorEnsemble, x_new, loss: str):
    """Decision for one point: a label under zero-one loss, a real under
    squared loss."""
    out = predict_batch(ens, np.atleast_2d(np.asarray(x_new, dtype=float)), loss)
    return int(out[0]) if loss == "zero_one" else float(out[0])


@dataclass
class EvalReport:
    loss: str
    value: float              # misclassification rate or mean squared error
    n_test: int
    predictions: np.ndarray
    truths: np.ndarray
    probs: np.ndarray | None  # per-point averaged class probabilities


def evaluate(ens: PosteriorEnsemble, X_test: np.ndarray, y_test: np.ndarray,
             loss: str) -> EvalReport:
    _check_loss(ens.model, loss)
    y_test = np.asarray(y_test)
    if len(y_test) == 0:
        raise ValueError("empty test set")
    if loss == "zero_one":
        probs = averaged_probs(ens, X_test)
        preds = np.argmax(probs, axis=1)
        value = float(np.mean(preds != y_test))
    else:
        probs = None
        preds = averaged_means(ens, X_test)
        value = float(np.mean((preds - y_test.astype(float)) ** 2))
    return EvalReport(
        loss=loss, value=value, n_test=len(y_test),
        predictions=preds, truths=y_test, probs=probs,
    )
