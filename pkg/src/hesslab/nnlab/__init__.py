"""Small neural networks with exact curvature access.

Models here expose analytic gradients and Hessian-vector products so the
spectral estimators can probe their loss curvature directly, plus a
finite-difference dense Hessian as an independent cross-check at small sizes.
"""

from .data import Dataset, generate_cluster_data, load_idx
from .models import (
    MlpClassifier,
    OneHiddenBinary,
    block_dominance,
    exact_hessian_small,
    hessian_operator,
    hvp,
    loss_grad,
)
from .training import TrainerSpec, TrainMetrics, train
from .experiments import block_dominance_experiment, scaling_experiment

__all__ = [
    "Dataset",
    "generate_cluster_data",
    "load_idx",
    "MlpClassifier",
    "OneHiddenBinary",
    "loss_grad",
    "hvp",
    "exact_hessian_small",
    "hessian_operator",
    "block_dominance",
    "TrainerSpec",
    "TrainMetrics",
    "train",
    "scaling_experiment",
    "block_dominance_experiment",
]
