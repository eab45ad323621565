"""Differentially private convex training with sparsified, compressively sensed gradients."""

__version__ = "0.1.0"

from .mechanism import MechanismOutput, PrivacyConfig, check_adjacent_sensitivity, privatize, privatize_dense, resolve_p
from .models import ModelSpec, ParamDomain
from .numkit import Rng
from .sensing import SensingMatrix, cosamp, make_sensing_matrix
from .sparsify import SparseVector, to_dense, top_k
from .trainer import BoundParams, RunRecord, StepRule, TrainConfig, step_size, suboptimality_bound, train

__all__ = [
    "BoundParams", "MechanismOutput", "ModelSpec", "ParamDomain", "PrivacyConfig", "Rng",
    "RunRecord", "SensingMatrix", "SparseVector", "StepRule", "TrainConfig",
    "check_adjacent_sensitivity", "cosamp", "make_sensing_matrix", "privatize",
    "privatize_dense", "resolve_p", "step_size", "suboptimality_bound", "to_dense", "top_k", "train",
]
