"""The interaction-aware spatio-temporal pyramid attention layer.

Pipeline: pool every pyramid level to the top level's spatial extent,
flatten, score channel vectors per level with a learned affine map, fuse
the per-level score matrices elementwise, softmax each fused row over all
spatio-temporal positions, L2-normalize, then aggregate the top level's
flattened features with the resulting attention matrix.

Parameter shapes depend only on the chosen levels' channel counts and the
top level's spatial size, never on the number of frames K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .tensor import Tensor

FUSION_KINDS = ("maximum", "sum", "multiplication")


@dataclass
class PyramidLevel:
    """One pyramid scale: raw features, pooled form, and flattened form.

    Flattening maps frame k, row w, column h to row p = k*(W*H) + w*H + h
    of a (K*W*H, C) matrix; ``unflatten_index`` inverts it.
    """

    features: Tensor     # (K, W_j, H_j, C_j)
    resized: Tensor      # (K, W_top, H_top, C_j)
    flattened: Tensor    # (K*W_top*H_top, C_j)

    @property
    def channels(self) -> int:
        return self.features.shape[3]


def flatten_index(k: int, w: int, h: int, width: int, height: int) -> int:
    return k * (width * height) + w * height + h


def unflatten_index(p: int, width: int, height: int) -> tuple[int, int, int]:
    k, rest = divmod(p, width * height)
    w, h = divmod(rest, height)
    return k, w, h


@dataclass
class AttentionLayerParams:
    """Per-level score weights/biases plus the fusion choice.

    weights[j] has shape (d, C_j) and biases[j] shape (d,), where d is the
    top level's W*H.
    """

    weights: list[Tensor]
    biases: list[Tensor]
    fusion: str
    d: int

    def __post_init__(self):
        if self.fusion not in FUSION_KINDS:
            raise ContractError(f"unknown fusion kind {self.fusion!r}")

    def trainable(self) -> list[Tensor]:
        return [*self.weights, *self.biases]

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.trainable())


def init_attention_params(
    level_channels: list[int],
    d: int,
    fusion: str,
    rng: np.random.Generator,
) -> AttentionLayerParams:
    """Zero-mean uniform init with half-width sqrt(6 / (d + C_j)) per level."""
    weights, biases = [], []
    for j, c in enumerate(level_channels):
        half = np.sqrt(6.0 / (d + c))
        weights.append(Tensor(rng.uniform(-half, half, size=(d, c)), name=f"attn_w{j}"))
        biases.append(Tensor(np.zeros(d), name=f"attn_b{j}"))
    return AttentionLayerParams(weights=weights, biases=biases, fusion=fusion, d=d)


@dataclass
class AttentionForwardRecord:
    """Intermediates of one attention forward pass, kept for the losses and
    for visualization."""

    levels: list[PyramidLevel]
    raw_scores: list[Tensor]        # Y_j, each (d, K*W*H)
    level_softmax: list[Tensor]     # softmax_rows(Y_j)
    fused_softmax: Tensor           # softmax_rows(fused scores), rows sum to 1
    attention: Tensor               # A, rows L2-normalized
    aggregated: Tensor              # M, (d, C_top)
    maps: Tensor = field(default=None)  # M', (W_top, H_top, C_top)


def build_pyramid(features: list[Tensor], top_index: int = -1) -> list[PyramidLevel]:
    """Pool every level to the top level's spatial extent and flatten.

    The last entry is the top level and passes through untouched; levels
    with smaller spatial extent than the top are rejected (no upsampling).
    """
    if not features:
        raise ContractError("build_pyramid needs at least one level")
    if top_index not in (-1, len(features) - 1):
        raise ContractError("the top level must be the last entry")
    top = features[-1]
    if top.data.ndim != 4:
        raise DimensionError(f"levels must be (K, W, H, C), got {top.shape}")
    K, W, H, _ = top.data.shape
    levels = []
    for f in features:
        if f.data.ndim != 4 or f.data.shape[0] != K:
            raise DimensionError(
                f"level shape {f.shape} does not agree with top level {top.shape}"
            )
        if f.data.shape[1] < W or f.data.shape[2] < H:
            raise DimensionError(
                f"level extent {f.shape[1:3]} smaller than top {(W, H)}; "
                "upsampling is unsupported"
            )
        resized = f if f is top else T.adaptive_max_pool2d(f, (W, H))
        flattened = T.reshape(resized, (K * W * H, f.data.shape[3]))
        levels.append(PyramidLevel(features=f, resized=resized, flattened=flattened))
    return levels


def compute_level_scores(level: PyramidLevel, weight: Tensor, bias: Tensor) -> Tensor:
    """Score matrix Y_j = weight @ X_j^T with the bias added to every column."""
    if weight.data.shape[1] != level.channels:
        raise DimensionError(
            f"weight columns {weight.data.shape[1]} != level channels {level.channels}"
        )
    return T.add_col_bias(T.matmul(weight, T.transpose2d(level.flattened)), bias)


def fuse_and_normalize(scores: list[Tensor], fusion: str) -> tuple[Tensor, Tensor, list[Tensor]]:
    """Fuse per-level scores, softmax each row, then L2-normalize.

    Returns (A, pre-L2 softmax, per-level softmaxed scores); the per-level
    softmaxes feed the divergence regularizer.
    """
    if not scores:
        raise ContractError("fuse_and_normalize needs at least one score matrix")
    fused = T.elementwise_combine(fusion, scores)
    pre = T.softmax_rows(fused)
    attention = T.l2_normalize_rows(pre)
    level_softmax = [T.softmax_rows(y) for y in scores]
    return attention, pre, level_softmax


def aggregate(attention: Tensor, x_top: Tensor, width: int, height: int) -> tuple[Tensor, Tensor]:
    """M = A @ X_top, reshaped row-major to the (W, H, C) attention maps."""
    if attention.data.shape[1] != x_top.data.shape[0]:
        raise DimensionError(
            f"attention columns {attention.data.shape[1]} != feature rows "
            f"{x_top.data.shape[0]}"
        )
    m = T.matmul(attention, x_top)
    channels = x_top.data.shape[1]
    if m.data.shape[0] != width * height:
        raise DimensionError(
            f"aggregated rows {m.data.shape[0]} != {width}*{height}"
        )
    maps = T.reshape(m, (width, height, channels))
    return m, maps


def attention_forward(features: list[Tensor], params: AttentionLayerParams) -> AttentionForwardRecord:
    """Full layer: pyramid -> per-level scores -> fuse/normalize -> aggregate."""
    return attention_from_levels(build_pyramid(features), params)


def attention_from_levels(levels: list[PyramidLevel], params: AttentionLayerParams) -> AttentionForwardRecord:
    """Layer body for callers that built (or batch-pooled) the pyramid themselves."""
    if len(levels) != len(params.weights):
        raise DimensionError(
            f"{len(levels)} pyramid levels but parameters for {len(params.weights)}"
        )
    top = levels[-1]
    _, W, H, C = top.resized.data.shape
    if params.d != W * H:
        raise DimensionError(f"params.d={params.d} != top level W*H={W * H}")
    scores = [
        compute_level_scores(level, w, b)
        for level, w, b in zip(levels, params.weights, params.biases)
    ]
    attention, pre, level_softmax = fuse_and_normalize(scores, params.fusion)
    m, maps = aggregate(attention, top.flattened, W, H)
    return AttentionForwardRecord(
        levels=levels,
        raw_scores=scores,
        level_softmax=level_softmax,
        fused_softmax=pre,
        attention=attention,
        aggregated=m,
        maps=maps,
    )
