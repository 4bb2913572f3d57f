"""Bayes-optimal prediction over model trees.

The generative model routes each point through a binary tree by midpoint
bisection of per-feature intervals; tree shape, the feature assigned to each
inner node, and leaf observation parameters all carry priors.  For a fixed
assignment, shape and leaf parameters integrate out exactly in one pass; the
assignment itself is sampled by Metropolis-Hastings with a proposal adapted
to the tree posterior, optionally under replica exchange.  Predictions
average the per-sample tree-marginalized predictives and decide under
zero-one or squared loss.
"""

from .kernels import active_backend, available_backends, set_backend
from .leafmodels import LeafModelSpec, PredictiveDistribution
from .mcmc import ChainResult, ProposalKind, TunerState, run_chain
from .metatree import MetaTreeState, build, predictive, sequential_update
from .model import ModelConfig
from .oracle import ExactPosterior, exact_bayes_predict, exact_k_posterior, js_divergence
from .predictor import EvalReport, PosteriorEnsemble, evaluate, predict
from .remc import ReplicaConfig, exchange_log_prob, run_remc
from .routing import FeatureSpace
from .tree import FullSubtree, TreeShape, enumerate_full_subtrees, tree_log_prior

__version__ = "0.1.0"

__all__ = [
    "ChainResult",
    "EvalReport",
    "ExactPosterior",
    "FeatureSpace",
    "FullSubtree",
    "LeafModelSpec",
    "MetaTreeState",
    "ModelConfig",
    "PosteriorEnsemble",
    "PredictiveDistribution",
    "ProposalKind",
    "ReplicaConfig",
    "TreeShape",
    "TunerState",
    "active_backend",
    "available_backends",
    "build",
    "enumerate_full_subtrees",
    "evaluate",
    "exact_bayes_predict",
    "exact_k_posterior",
    "exchange_log_prob",
    "js_divergence",
    "predict",
    "predictive",
    "run_chain",
    "run_remc",
    "sequential_update",
    "set_backend",
    "tree_log_prior",
    "__version__",
]
