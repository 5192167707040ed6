"""Toy three-stage convolutional backbone, classifier head, and the full
model assembly around the pyramid-attention layer.

For 32x32x1 frames the backbone emits features of shapes (K,16,16,8),
(K,8,8,16) and (K,4,4,32); the attention layer pools everything to the
4x4 top level (d = 16) and the head maps the aggregated 4x4x32 maps to
class logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import (
    AttentionForwardRecord,
    AttentionLayerParams,
    attention_forward,
    init_attention_params,
)
from .errors import DimensionError, ParameterError
from .tensor import Tensor

BACKBONE_CHANNELS = (8, 16, 32)
TOP_SHAPE = (4, 4, 32)
HEAD_HIDDEN = 64
NUM_CLASSES = 3
# spatial extent of each candidate pyramid level, deepest last; the raw
# input frame doubles as the shallowest level for the 4-scale variant
LEVEL_EXTENTS = (32, 16, 8, 4)
MAX_SCALES = len(LEVEL_EXTENTS)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    half = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-half, half, size=shape)


@dataclass
class ModelParams:
    """All trainable tensors of backbone, attention layer and head."""

    conv_kernels: list[Tensor]
    conv_biases: list[Tensor]
    attention: AttentionLayerParams
    head_w1: Tensor
    head_b1: Tensor
    head_w2: Tensor
    head_b2: Tensor
    scales: int = 3
    aggregation: str = "attention"

    def named(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (k, b) in enumerate(zip(self.conv_kernels, self.conv_biases)):
            out[f"conv{i}.kernel"] = k
            out[f"conv{i}.bias"] = b
        for j, (w, b) in enumerate(zip(self.attention.weights, self.attention.biases)):
            out[f"attn{j}.weight"] = w
            out[f"attn{j}.bias"] = b
        out["head.w1"] = self.head_w1
        out["head.b1"] = self.head_b1
        out["head.w2"] = self.head_w2
        out["head.b2"] = self.head_b2
        return out

    def trainable(self) -> list[Tensor]:
        return list(self.named().values())

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.trainable())

    def zero_grad(self) -> None:
        for t in self.trainable():
            t.zero_grad()


def build_model(
    seed: int,
    scales: int = 3,
    fusion: str = "multiplication",
    aggregation: str = "attention",
) -> ModelParams:
    if not 1 <= scales <= MAX_SCALES:
        raise ParameterError(f"scales must be in 1..{MAX_SCALES}, got {scales}")
    if aggregation not in ("attention", "meanpool"):
        raise ParameterError(f"unknown aggregation {aggregation!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
    kernels, biases = [], []
    cin = 1
    for cout in BACKBONE_CHANNELS:
        fan_in, fan_out = 9 * cin, 9 * cout
        kernels.append(Tensor(_glorot(rng, (3, 3, cin, cout), fan_in, fan_out)))
        biases.append(Tensor(np.zeros(cout)))
        cin = cout
    d = TOP_SHAPE[0] * TOP_SHAPE[1]
    level_channels = list((1,) + BACKBONE_CHANNELS)[-scales:]
    attention = init_attention_params(level_channels, d, fusion, rng)
    flat = TOP_SHAPE[0] * TOP_SHAPE[1] * TOP_SHAPE[2]
    head_w1 = Tensor(_glorot(rng, (flat, HEAD_HIDDEN), flat, HEAD_HIDDEN))
    head_b1 = Tensor(np.zeros(HEAD_HIDDEN))
    head_w2 = Tensor(_glorot(rng, (HEAD_HIDDEN, NUM_CLASSES), HEAD_HIDDEN, NUM_CLASSES))
    head_b2 = Tensor(np.zeros(NUM_CLASSES))
    return ModelParams(
        conv_kernels=kernels,
        conv_biases=biases,
        attention=attention,
        head_w1=head_w1,
        head_b1=head_b1,
        head_w2=head_w2,
        head_b2=head_b2,
        scales=scales,
        aggregation=aggregation,
    )


def backbone_forward(frames: Tensor, params: ModelParams) -> list[Tensor]:
    """Three stages of conv3x3(same) -> relu -> pool to half, frame-wise with
    shared weights. Returns the three stage outputs, shallowest first."""
    if frames.data.ndim != 4 or frames.data.shape[1:] != (32, 32, 1):
        raise DimensionError(f"backbone expects (K, 32, 32, 1) frames, got {frames.shape}")
    x = frames
    stages = []
    extent = 32
    for kernel, bias in zip(params.conv_kernels, params.conv_biases):
        x = T.relu(T.add_channel_bias(T.conv2d(x, kernel, stride=1, padding="same"), bias))
        extent //= 2
        x = T.adaptive_max_pool2d(x, (extent, extent))
        stages.append(x)
    return stages


def head_forward(maps: Tensor, params: ModelParams) -> Tensor:
    """Flatten the attention maps, one hidden relu layer, then class logits."""
    if maps.data.shape != TOP_SHAPE:
        raise DimensionError(f"head expects maps of shape {TOP_SHAPE}, got {maps.shape}")
    flat = T.reshape(maps, (1, maps.data.size))
    hidden = T.relu(T.affine(flat, params.head_w1, params.head_b1))
    logits = T.affine(hidden, params.head_w2, params.head_b2)
    return T.reshape(logits, (NUM_CLASSES,))


def forward_clip(frames: Tensor, params: ModelParams) -> tuple[Tensor, AttentionForwardRecord | None]:
    """Full pipeline for one clip of K frames: backbone, aggregation over
    frames (attention or the mean-pool baseline), then the head."""
    stages = backbone_forward(frames, params)
    levels = ([frames] + stages)[-params.scales :]
    if params.aggregation == "meanpool":
        pooled = T.reshape(_mean_frames(stages[-1]), TOP_SHAPE)
        return head_forward(pooled, params), None
    record = attention_forward(levels, params.attention)
    return head_forward(record.maps, params), record


def _mean_frames(x: Tensor) -> Tensor:
    k = x.data.shape[0]
    flat = T.reshape(x, (k, x.data.size // k))
    ones = Tensor(np.full((1, k), 1.0 / k))
    return T.matmul(ones, flat)
