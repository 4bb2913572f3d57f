"""Conjugate observation models attached to tree nodes.

Every family exposes the same contract: per-observation sufficient-statistic
rows that can be scattered onto nodes, a closed-form log marginal likelihood
of the data accumulated at a node (log of the prior predictive of the whole
batch), and the posterior predictive distribution used for prediction.  All
likelihood arithmetic is done in log space via log-gamma functions.

Stat row layouts (one row per observation, accumulated by summation):

* bernoulli_beta:        [count of y=0, count of y=1]
* categorical_dirichlet: one-hot class counts, length C
* poisson_gamma:         [n, sum y, sum lgamma(y+1)]
* normal_normalgamma:    [n, sum y, sum y^2]
* linreg_normalgamma:    [n, y'y, X'y (d), vec(X'X) (d*d)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

FAMILIES = (
    "bernoulli_beta",
    "categorical_dirichlet",
    "poisson_gamma",
    "normal_normalgamma",
    "linreg_normalgamma",
)


@dataclass
class PredictiveDistribution:
    """Posterior predictive at one node or mixture: probabilities over a
    finite label set, or a mean plus log-density/mass evaluator otherwise."""

    mean: float
    probs: np.ndarray | None = None
    log_pdf: Callable[[float], float] | None = None


def _student_t_logpdf(y, df, loc, scale2):
    z2 = (y - loc) ** 2 / (df * scale2)
    return (
        gammaln((df + 1.0) / 2.0)
        - gammaln(df / 2.0)
        - 0.5 * np.log(df * np.pi * scale2)
        - (df + 1.0) / 2.0 * np.log1p(z2)
    )


class LeafModel:
    """Shared interface; concrete families override the array math."""

    family: str
    stat_dim: int
    n_classes: int | None = None  # finite label sets only
    needs_x: bool = False

    def empty_stats(self) -> np.ndarray:
        return np.zeros(self.stat_dim)

    def contributions(self, X: np.ndarray | None, y: np.ndarray) -> np.ndarray:
        """Per-observation stat rows, shape (n, stat_dim).  Validates support."""
        raise NotImplementedError

    def update(self, stats: np.ndarray, x, y, remove: bool = False) -> np.ndarray:
        row = self.contributions(
            None if not self.needs_x else np.atleast_2d(np.asarray(x, dtype=float)),
            np.asarray([y]),
        )[0]
        return stats - row if remove else stats + row

    def counts(self, stats: np.ndarray) -> np.ndarray:
        """Number of observations per stats row (works on 1-d or 2-d input)."""
        raise NotImplementedError

    def log_marginal(self, stats: np.ndarray) -> float:
        out = self.log_marginal_rows(stats[None, :])
        return float(out[0])

    def log_marginal_rows(self, stats: np.ndarray) -> np.ndarray:
        """Vectorized log marginal over stats rows; exactly 0 for empty rows."""
        raise NotImplementedError

    def log_predictive(self, stats: np.ndarray, x, y) -> float:
        updated = self.update(stats, x, y)
        return self.log_marginal(updated) - self.log_marginal(stats)

    def predictive(self, stats: np.ndarray, x=None) -> PredictiveDistribution:
        raise NotImplementedError

    # vectorized predictive pieces used by batched tree prediction
    def pred_probs_rows(self, stats: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.family} has no finite label set")

    def pred_mean_rows(self, stats: np.ndarray, X: np.ndarray | None) -> np.ndarray:
        raise NotImplementedError

    def pred_logpdf_rows(self, stats, X, y) -> np.ndarray:
        raise NotImplementedError

    # generative sampling, used by the synthetic-data driver
    def sample_params(self, rng: np.random.Generator):
        raise NotImplementedError

    def sample_y(self, params, x, rng: np.random.Generator):
        raise NotImplementedError


class BernoulliBeta(LeafModel):
    family = "bernoulli_beta"
    stat_dim = 2
    n_classes = 2

    def __init__(self, alpha: float, beta: float) -> None:
        if alpha <= 0 or beta <= 0:
            raise ValueError("Beta hyperparameters must be positive")
        self.alpha = float(alpha)
        self.beta = float(beta)

    def contributions(self, X, y):
        y = np.asarray(y)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("Bernoulli observations must be 0 or 1")
        out = np.zeros((len(y), 2))
        out[np.arange(len(y)), y.astype(np.int64)] = 1.0
        return out

    def counts(self, stats):
        return stats[..., 0] + stats[..., 1]

    def log_marginal_rows(self, stats):
        n0, n1 = stats[..., 0], stats[..., 1]
        n = n0 + n1
        a, b = self.alpha, self.beta
        val = (
            gammaln(a + n1) + gammaln(b + n0) - gammaln(a + b + n)
            - (gammaln(a) + gammaln(b) - gammaln(a + b))
        )
        return np.where(n == 0, 0.0, val)

    def predictive(self, stats, x=None):
        probs = self.pred_probs_rows(stats[None, :])[0]
        return PredictiveDistribution(
            mean=float(probs[1]),
            probs=probs,
            log_pdf=lambda y: float(np.log(probs[int(y)])),
        )

    def pred_probs_rows(self, stats):
        a, b = self.alpha, self.beta
        denom = a + b + stats[..., 0] + stats[..., 1]
        p1 = (a + stats[..., 1]) / denom
        return np.stack([1.0 - p1, p1], axis=-1)

    def pred_mean_rows(self, stats, X=None):
        return self.pred_probs_rows(stats)[..., 1]

    def sample_params(self, rng):
        return rng.beta(self.alpha, self.beta)

    def sample_y(self, params, x, rng):
        return int(rng.random() < params)


class CategoricalDirichlet(LeafModel):
    family = "categorical_dirichlet"

    def __init__(self, alphas) -> None:
        self.alphas = np.asarray(alphas, dtype=float)
        if self.alphas.ndim != 1 or len(self.alphas) < 2:
            raise ValueError("need a concentration vector of length >= 2")
        if np.any(self.alphas <= 0):
            raise ValueError("Dirichlet concentrations must be positive")
        self.n_classes = len(self.alphas)
        self.stat_dim = self.n_classes

    def contributions(self, X, y):
        y = np.asarray(y, dtype=np.int64)
        if y.min(initial=0) < 0 or y.max(initial=0) >= self.n_classes:
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        out = np.zeros((len(y), self.n_classes))
        out[np.arange(len(y)), y] = 1.0
        return out

    def counts(self, stats):
        return stats.sum(axis=-1)

    def log_marginal_rows(self, stats):
        A = self.alphas.sum()
        n = stats.sum(axis=-1)
        val = (
            gammaln(A) - gammaln(A + n)
            + (gammaln(self.alphas + stats) - gammaln(self.alphas)).sum(axis=-1)
        )
        return np.where(n == 0, 0.0, val)

    def predictive(self, stats, x=None):
        probs = self.pred_probs_rows(stats[None, :])[0]
        mean = float((probs * np.arange(self.n_classes)).sum())
        return PredictiveDistribution(
            mean=mean, probs=probs, log_pdf=lambda y: float(np.log(probs[int(y)]))
        )

    def pred_probs_rows(self, stats):
        denom = (self.alphas.sum() + stats.sum(axis=-1))[..., None]
        return (self.alphas + stats) / denom

    def pred_mean_rows(self, stats, X=None):
        return self.pred_probs_rows(stats) @ np.arange(self.n_classes, dtype=float)

    def sample_params(self, rng):
        return rng.dirichlet(self.alphas)

    def sample_y(self, params, x, rng):
        return int(rng.choice(self.n_classes, p=params))


class PoissonGamma(LeafModel):
    family = "poisson_gamma"
    stat_dim = 3

    def __init__(self, alpha: float, beta: float) -> None:
        if alpha <= 0 or beta <= 0:
            raise ValueError("Gamma hyperparameters must be positive")
        self.alpha = float(alpha)
        self.beta = float(beta)

    def contributions(self, X, y):
        y = np.asarray(y)
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise ValueError("Poisson observations must be nonnegative integers")
        y = y.astype(float)
        return np.stack([np.ones_like(y), y, gammaln(y + 1.0)], axis=-1)

    def counts(self, stats):
        return stats[..., 0]

    def log_marginal_rows(self, stats):
        n, S, G = stats[..., 0], stats[..., 1], stats[..., 2]
        a, b = self.alpha, self.beta
        val = a * math.log(b) - gammaln(a) + gammaln(a + S) - (a + S) * np.log(b + n) - G
        return np.where(n == 0, 0.0, val)

    def predictive(self, stats, x=None):
        n, S = stats[0], stats[1]
        a_n, b_n = self.alpha + S, self.beta + n

        def log_pmf(y):
            yy = float(y)
            if yy < 0 or yy != math.floor(yy):
                return -math.inf
            return float(
                gammaln(a_n + yy) - gammaln(a_n) - math.lgamma(yy + 1.0)
                + a_n * math.log(b_n / (b_n + 1.0)) - yy * math.log(b_n + 1.0)
            )

        return PredictiveDistribution(mean=a_n / b_n, log_pdf=log_pmf)

    def pred_mean_rows(self, stats, X=None):
        return (self.alpha + stats[..., 1]) / (self.beta + stats[..., 0])

    def pred_logpdf_rows(self, stats, X, y):
        a_n = self.alpha + stats[..., 1]
        b_n = self.beta + stats[..., 0]
        y = np.asarray(y, dtype=float)
        return (
            gammaln(a_n + y) - gammaln(a_n) - gammaln(y + 1.0)
            + a_n * np.log(b_n / (b_n + 1.0)) - y * np.log(b_n + 1.0)
        )

    def sample_params(self, rng):
        return rng.gamma(self.alpha, 1.0 / self.beta)

    def sample_y(self, params, x, rng):
        return int(rng.poisson(params))


class NormalNormalGamma(LeafModel):
    """Normal observations, normal-gamma prior: mu | s2 ~ N(m, gamma*s2),
    1/s2 ~ Gamma(alpha, rate beta)."""

    family = "normal_normalgamma"
    stat_dim = 3

    def __init__(self, m: float, gamma: float, alpha: float, beta: float) -> None:
        if gamma <= 0 or alpha <= 0 or beta <= 0:
            raise ValueError("gamma, alpha, beta must be positive")
        self.m = float(m)
        self.kappa = 1.0 / float(gamma)
        self.alpha = float(alpha)
        self.beta = float(beta)

    def contributions(self, X, y):
        y = np.asarray(y, dtype=float)
        if not np.isfinite(y).all():
            raise ValueError("observations must be finite")
        return np.stack([np.ones_like(y), y, y * y], axis=-1)

    def counts(self, stats):
        return stats[..., 0]

    def _posterior(self, stats):
        n, S1, S2 = stats[..., 0], stats[..., 1], stats[..., 2]
        k, m = self.kappa, self.m
        k_n = k + n
        m_n = (k * m + S1) / k_n
        a_n = self.alpha + n / 2.0
        b_n = self.beta + 0.5 * (S2 + k * m * m - k_n * m_n * m_n)
        return n, k_n, m_n, a_n, b_n

    def log_marginal_rows(self, stats):
        n, k_n, m_n, a_n, b_n = self._posterior(stats)
        val = (
            -n / 2.0 * math.log(2.0 * math.pi)
            + 0.5 * (math.log(self.kappa) - np.log(k_n))
            + gammaln(a_n) - gammaln(self.alpha)
            + self.alpha * math.log(self.beta) - a_n * np.log(b_n)
        )
        return np.where(n == 0, 0.0, val)

    def predictive(self, stats, x=None):
        _, k_n, m_n, a_n, b_n = self._posterior(stats)
        df = 2.0 * a_n
        scale2 = b_n * (k_n + 1.0) / (a_n * k_n)
        return PredictiveDistribution(
            mean=float(m_n),
            log_pdf=lambda y: float(_student_t_logpdf(y, df, m_n, scale2)),
        )

    def pred_mean_rows(self, stats, X=None):
        _, _, m_n, _, _ = self._posterior(stats)
        return m_n

    def pred_logpdf_rows(self, stats, X, y):
        _, k_n, m_n, a_n, b_n = self._posterior(stats)
        scale2 = b_n * (k_n + 1.0) / (a_n * k_n)
        return _student_t_logpdf(np.asarray(y, dtype=float), 2.0 * a_n, m_n, scale2)

    def sample_params(self, rng):
        s2 = 1.0 / rng.gamma(self.alpha, 1.0 / self.beta)
        mu = rng.normal(self.m, math.sqrt(s2 / self.kappa))
        return mu, s2

    def sample_y(self, params, x, rng):
        mu, s2 = params
        return float(rng.normal(mu, math.sqrt(s2)))


class LinRegNormalGamma(LeafModel):
    """Bayesian linear regression: y ~ N(w'x, s2), w | s2 ~ N(m, s2*inv(Lam)),
    1/s2 ~ Gamma(alpha, rate beta).  Optionally augments x with a constant 1."""

    family = "linreg_normalgamma"
    needs_x = True

    def __init__(self, m, lam, alpha: float, beta: float, x_dim: int,
                 intercept: bool = True) -> None:
        if alpha <= 0 or beta <= 0:
            raise ValueError("alpha, beta must be positive")
        self.intercept = bool(intercept)
        self.d = int(x_dim) + (1 if self.intercept else 0)
        m = np.asarray(m, dtype=float)
        self.m = np.full(self.d, float(m)) if m.ndim == 0 else m
        lam = np.asarray(lam, dtype=float)
        self.lam = np.eye(self.d) * float(lam) if lam.ndim == 0 else lam
        if self.m.shape != (self.d,) or self.lam.shape != (self.d, self.d):
            raise ValueError(f"mean/precision must have dimension {self.d}")
        if not np.allclose(self.lam, self.lam.T):
            raise ValueError("precision matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(self.lam) <= 0):
            raise ValueError("precision matrix must be positive definite")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.stat_dim = 2 + self.d + self.d * self.d
        self._logdet_lam = float(np.linalg.slogdet(self.lam)[1])

    def _augment(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.intercept:
            X = np.concatenate([X, np.ones((len(X), 1))], axis=1)
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} regressor columns, got {X.shape[1]}")
        return X

    def contributions(self, X, y):
        if X is None:
            raise ValueError("linear regression requires explanatory variables")
        X = self._augment(X)
        y = np.asarray(y, dtype=float)
        if not np.isfinite(y).all():
            raise ValueError("observations must be finite")
        n = len(y)
        out = np.empty((n, self.stat_dim))
        out[:, 0] = 1.0
        out[:, 1] = y * y
        out[:, 2:2 + self.d] = X * y[:, None]
        out[:, 2 + self.d:] = (X[:, :, None] * X[:, None, :]).reshape(n, -1)
        return out

    def counts(self, stats):
        return stats[..., 0]

    def _posterior(self, stats):
        d = self.d
        n = stats[..., 0]
        yty = stats[..., 1]
        xty = stats[..., 2:2 + d]
        xtx = stats[..., 2 + d:].reshape(stats.shape[:-1] + (d, d))
        lam_n = self.lam + xtx
        m_n = np.linalg.solve(lam_n, ((self.lam @ self.m) + xty)[..., None])[..., 0]
        a_n = self.alpha + n / 2.0
        quad0 = float(self.m @ self.lam @ self.m)
        quad_n = np.einsum("...i,...ij,...j->...", m_n, lam_n, m_n)
        b_n = self.beta + 0.5 * (yty + quad0 - quad_n)
        return n, lam_n, m_n, a_n, b_n

    def log_marginal_rows(self, stats):
        n, lam_n, m_n, a_n, b_n = self._posterior(stats)
        logdet_n = np.linalg.slogdet(lam_n)[1]
        val = (
            -n / 2.0 * math.log(2.0 * math.pi)
            + 0.5 * (self._logdet_lam - logdet_n)
            + gammaln(a_n) - gammaln(self.alpha)
            + self.alpha * math.log(self.beta) - a_n * np.log(b_n)
        )
        return np.where(n == 0, 0.0, val)

    def predictive(self, stats, x=None):
        if x is None:
            raise ValueError("linear regression prediction requires x")
        xa = self._augment(x)[0]
        _, lam_n, m_n, a_n, b_n = self._posterior(stats)
        loc = float(m_n @ xa)
        scale2 = float(b_n * (1.0 + xa @ np.linalg.solve(lam_n, xa)) / a_n)
        df = 2.0 * a_n
        return PredictiveDistribution(
            mean=loc, log_pdf=lambda y: float(_student_t_logpdf(y, df, loc, scale2))
        )

    def pred_mean_rows(self, stats, X):
        Xa = self._augment(X)
        _, _, m_n, _, _ = self._posterior(stats)
        return np.einsum("...i,...i->...", m_n, Xa)

    def pred_logpdf_rows(self, stats, X, y):
        Xa = self._augment(X)
        _, lam_n, m_n, a_n, b_n = self._posterior(stats)
        loc = np.einsum("...i,...i->...", m_n, Xa)
        quad = np.einsum("...i,...i->...", Xa, np.linalg.solve(lam_n, Xa[..., None])[..., 0])
        scale2 = b_n * (1.0 + quad) / a_n
        return _student_t_logpdf(np.asarray(y, dtype=float), 2.0 * a_n, loc, scale2)

    def sample_params(self, rng):
        s2 = 1.0 / rng.gamma(self.alpha, 1.0 / self.beta)
        cov = s2 * np.linalg.inv(self.lam)
        w = rng.multivariate_normal(self.m, cov)
        return w, s2

    def sample_y(self, params, x, rng):
        w, s2 = params
        xa = self._augment(x)[0]
        return float(rng.normal(w @ xa, math.sqrt(s2)))


@dataclass(frozen=True)
class LeafModelSpec:
    """Declarative family + hyperparameters, buildable into a LeafModel."""

    family: str
    params: dict = field(default_factory=dict)

    def build(self, x_dim: int | None = None) -> LeafModel:
        p = self.params
        if self.family == "bernoulli_beta":
            return BernoulliBeta(p.get("alpha", 0.5), p.get("beta", 0.5))
        if self.family == "categorical_dirichlet":
            return CategoricalDirichlet(p["alphas"])
        if self.family == "poisson_gamma":
            return PoissonGamma(p.get("alpha", 1.0), p.get("beta", 1.0))
        if self.family == "normal_normalgamma":
            return NormalNormalGamma(
                p.get("m", 0.0), p.get("gamma", 1.0), p.get("alpha", 1.0), p.get("beta", 1.0)
            )
        if self.family == "linreg_normalgamma":
            if x_dim is None:
                raise ValueError("linreg_normalgamma needs the feature dimension")
            return LinRegNormalGamma(
                p.get("m", 0.0), p.get("lam", 1.0), p.get("alpha", 1.0),
                p.get("beta", 1.0), x_dim, p.get("intercept", True),
            )
        raise ValueError(f"unknown leaf model family {self.family!r}; choose from {FAMILIES}")


def predictive_summary(model: LeafModel, stats: np.ndarray, x_new, loss: str) -> PredictiveDistribution:
    """Posterior predictive packaged for the requested loss.

    zero_one requires a finite label set; squared works for every family and
    reports the closed-form posterior predictive mean.
    """
    if loss not in ("zero_one", "squared"):
        raise ValueError(f"unknown loss {loss!r}")
    if loss == "zero_one" and model.n_classes is None:
        raise ValueError(f"zero_one loss needs a finite label set, not {model.family}")
    return model.predictive(stats, x_new)
