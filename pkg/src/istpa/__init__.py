"""Interaction-aware spatio-temporal pyramid attention as a verifiable
numerics library: tape autodiff, the attention layer and its losses, a
Jacobi PCA oracle, a synthetic video harness, and salience export."""

from .attention import (
    AttentionForwardRecord,
    AttentionLayerParams,
    PyramidLevel,
    attention_forward,
    build_pyramid,
)
from .estimator import PyramidAttentionVideoClassifier, check_clip_array
from .losses import LossBreakdown, LossWeights, total_loss
from .pca import PcaBasis, covariance_eigenbasis, pca_trace, verify_attention_vs_pca
from .tensor import Tape, Tensor, grad_check
from .trainer import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

__all__ = [
    "AttentionForwardRecord",
    "AttentionLayerParams",
    "PyramidLevel",
    "attention_forward",
    "build_pyramid",
    "PyramidAttentionVideoClassifier",
    "check_clip_array",
    "LossBreakdown",
    "LossWeights",
    "total_loss",
    "PcaBasis",
    "covariance_eigenbasis",
    "pca_trace",
    "verify_attention_vs_pca",
    "Tape",
    "Tensor",
    "grad_check",
    "TrainConfig",
    "evaluate",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
