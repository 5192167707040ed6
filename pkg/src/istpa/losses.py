"""Training objective: cross-entropy plus the interaction-aware and
attention-divergence regularizers and weight decay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class LossWeights:
    """Coefficients of the combined objective."""

    lambda_wd: float = 4e-5
    beta: float = 1e-4
    gamma: float = 1e-4

    def __post_init__(self):
        if min(self.lambda_wd, self.beta, self.gamma) < 0:
            raise ContractError("loss weights must be non-negative")


@dataclass
class LossBreakdown:
    """Scalar tensors for each component and their weighted total."""

    classification: Tensor
    weight_decay: Tensor
    interactive: Tensor
    divergence: Tensor
    total: Tensor

    def values(self) -> dict[str, float]:
        return {
            "classification": self.classification.item(),
            "weight_decay": self.weight_decay.item(),
            "interactive": self.interactive.item(),
            "divergence": self.divergence.item(),
            "total": self.total.item(),
        }


def interactive_loss(attention: Tensor, x: Tensor) -> Tensor:
    """PCA-style penalty on the attention matrix.

    Returns -sum_m (A X X^T A^T)[m][m] + sum_{m != n} ((A A^T)[m][n])^2.
    The first term rewards projected covariance, the second drives rows of
    A toward pairwise orthogonality.
    """
    if attention.data.ndim != 2 or x.data.ndim != 2:
        raise DimensionError("interactive_loss expects 2-d A and X")
    d, p = attention.data.shape
    if x.data.shape[0] != p:
        raise DimensionError(
            f"A columns {p} != X rows {x.data.shape[0]}"
        )
    projected = T.matmul(attention, x)
    trace_term = T.neg(T.sum_all(T.square(projected)))
    gram = T.matmul(attention, T.transpose2d(attention))
    off_mask = 1.0 - np.eye(d)
    ortho_term = T.sum_all(T.square(T.mul_const(gram, off_mask)))
    return T.add(trace_term, ortho_term)


def divergence_loss(attention: Tensor, level_softmax: Sequence[Tensor]) -> Tensor:
    """sqrt(sum_j sum_m sum_k (1 - |A - softmax(Y_j)|^2)).

    The square-root argument is analytically non-negative; it is clamped at
    zero before the root to absorb rounding residue.
    """
    level_softmax = list(level_softmax)
    if not level_softmax:
        raise ContractError("divergence_loss needs at least one per-level softmax")
    d, p = attention.data.shape
    acc = Tensor(float(len(level_softmax) * d * p))
    for s in level_softmax:
        if s.data.shape != (d, p):
            raise DimensionError(
                f"per-level softmax shape {s.data.shape} != attention shape {(d, p)}"
            )
        diff = attention.data - s.data
        if np.any(np.abs(diff) > 1.0 + 1e-9):
            raise ContractError(
                "attention/softmax difference outside [-1, 1]; upstream "
                "normalization is broken"
            )
        acc = T.sub(acc, T.sum_all(T.square(T.sub(attention, s))))
    return T.sqrt_clamped(acc)


def unit_frobenius(x: Tensor) -> Tensor:
    """Scale a 2-d feature block to unit Frobenius norm, differentiably.

    The interaction penalty's projected-variance reward grows with the raw
    feature scale, which would pay the backbone for inflating activations
    without bound; normalizing the block first makes the reward
    scale-invariant while leaving the preferred subspace unchanged.
    """
    p, c = x.data.shape
    return T.reshape(T.l2_normalize_rows(T.reshape(x, (1, p * c))), (p, c))


def classification_loss(logits: Tensor, label: int) -> Tensor:
    """Cross-entropy -log softmax(logits)[label], stable via log-sum-exp."""
    return T.cross_entropy_logits(logits, label)


def total_loss(
    logits: Tensor,
    label: int,
    attention: Tensor,
    x_top: Tensor,
    level_softmax: Sequence[Tensor],
    trainable: Sequence[Tensor],
    weights: LossWeights,
    enable_interactive: bool = True,
    enable_divergence: bool = True,
) -> LossBreakdown:
    """Compose the full objective; every component stays differentiable."""
    classification = classification_loss(logits, label)
    decay = Tensor(0.0)
    for p in trainable:
        decay = T.add(decay, T.sum_all(T.square(p)))
    interactive = (
        interactive_loss(attention, unit_frobenius(x_top))
        if enable_interactive
        else Tensor(0.0)
    )
    divergence = (
        divergence_loss(attention, level_softmax) if enable_divergence else Tensor(0.0)
    )
    total = T.add(classification, T.mul_const(decay, weights.lambda_wd))
    total = T.add(total, T.mul_const(interactive, weights.beta))
    total = T.add(total, T.mul_const(divergence, weights.gamma))
    return LossBreakdown(
        classification=classification,
        weight_decay=decay,
        interactive=interactive,
        divergence=divergence,
        total=total,
    )
