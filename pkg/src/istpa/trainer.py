"""Training and evaluation driver: segment frame sampling, SGD with
momentum and step decay, CSV metrics, and bit-exact checkpoints."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .attention import FUSION_KINDS
from .data import NUM_CLASSES, ClipSample, generate_corpus
from .errors import IntegrityError, ParameterError
from .tensor import cross_entropy_rows
from .model import MAX_SCALES, ModelParams, build_model, forward_clip
from .tensor import Tape, Tensor

METRICS_HEADER = "iter,total,ce,wd,interactive,divergence,acc"
CHECKPOINT_MAGIC = b"ISTPA-CKPT1\n"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    k_train: int = 3
    k_eval: int = 8
    scales: int = 3
    fusion: str = "multiplication"
    lr: float = 0.01
    lr_decay: float = 0.1
    decay_every: int = 100
    momentum: float = 0.9
    lambda_wd: float = 4e-5
    beta: float = 1e-3
    gamma: float = 1e-4
    batch: int = 16
    iterations: int = 250
    seed: int = 7
    enable_interactive: bool = True
    enable_divergence: bool = True
    clip_len: int = 8
    train_clips: int = 300
    eval_clips: int = 150
    dropout: float = 0.0
    aggregation: str = "attention"

    def validate(self) -> "TrainConfig":
        if self.k_train < 1 or self.k_eval < 1 or self.clip_len < 1:
            raise ParameterError("frame counts must be >= 1")
        if not 1 <= self.scales <= MAX_SCALES:
            raise ParameterError(f"scales must be in 1..{MAX_SCALES}")
        if self.fusion not in FUSION_KINDS:
            raise ParameterError(f"fusion must be one of {FUSION_KINDS}")
        if self.lr < 0 or self.lr_decay <= 0 or self.decay_every < 1:
            raise ParameterError("learning-rate schedule values must be positive")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if min(self.lambda_wd, self.beta, self.gamma) < 0:
            raise ParameterError("loss weights must be non-negative")
        if self.batch < 1 or self.iterations < 0:
            raise ParameterError("batch must be >= 1 and iterations >= 0")
        if self.k_train > self.clip_len:
            raise ParameterError("k_train cannot exceed clip_len")
        if not 0 <= self.dropout < 1:
            raise ParameterError("dropout must lie in [0, 1)")
        if self.aggregation not in ("attention", "meanpool"):
            raise ParameterError("aggregation must be 'attention' or 'meanpool'")
        return self

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw).validate()

    def to_dict(self) -> dict:
        return asdict(self)


def segment_sample(clip_len: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Split the clip into k contiguous segments and pick one frame each."""
    edges = np.linspace(0, clip_len, k + 1)
    picks = []
    for s in range(k):
        lo, hi = int(edges[s]), max(int(edges[s + 1]), int(edges[s]) + 1)
        picks.append(int(rng.integers(lo, min(hi, clip_len))))
    return np.array(picks)


def uniform_sample(clip_len: int, k: int) -> np.ndarray:
    """Evenly spaced frame indices; all frames when k >= clip length."""
    if k >= clip_len:
        return np.arange(clip_len)
    return np.unique(np.round(np.linspace(0, clip_len - 1, k)).astype(int))


def _batched_objective(frames: np.ndarray, labels: np.ndarray, params: ModelParams, config: TrainConfig):
    """One minibatch graph, fully vectorized over clips.

    The backbone and pyramid pooling run over all clips' frames at once;
    attention rows are regrouped to (batch*d, k*w*h) so one softmax/L2 pass
    normalizes every clip, and aggregation plus the interaction penalty use
    batched matmuls. The returned objective is the mean of the per-clip
    totals with weight decay counted once; it matches the per-clip layer
    (attention_forward + total_loss) bit-for-bit in structure, just batched.

    Returns (objective, (mean ce, mean interactive, mean divergence),
    weight decay value, correct count).
    """
    from .model import TOP_SHAPE, backbone_forward

    batch, k = frames.shape[0], frames.shape[1]
    all_frames = Tensor(frames.reshape(batch * k, *frames.shape[2:]), no_grad=True)
    stages = backbone_forward(all_frames, params)
    w_top, h_top, c_top = TOP_SHAPE
    d = w_top * h_top
    kwh = k * d
    level_feats = ([all_frames] + stages)[-params.scales :]
    pooled = [
        lv if lv.data.shape[1:3] == (w_top, h_top) else T.adaptive_max_pool2d(lv, (w_top, h_top))
        for lv in level_feats
    ]

    def regroup(y: Tensor) -> Tensor:
        # (d, batch*kwh) with clip-major columns -> (batch*d, kwh)
        return T.reshape(T.permute(T.reshape(y, (d, batch, kwh)), (1, 0, 2)), (batch * d, kwh))

    x_top = T.reshape(pooled[-1], (batch * kwh, c_top))
    if params.aggregation == "meanpool":
        ones = Tensor(np.full((batch, 1, k), 1.0 / k), no_grad=True)
        maps = T.reshape(
            T.bmm(ones, T.reshape(x_top, (batch, k, d * c_top))), (batch, d * c_top)
        )
        attention3 = None
    else:
        scores = []
        for lv, w, b in zip(pooled, params.attention.weights, params.attention.biases):
            x_j = T.reshape(lv, (batch * kwh, lv.data.shape[3]))
            scores.append(T.add_col_bias(T.matmul(w, T.transpose2d(x_j)), b))
        fused = T.elementwise_combine(params.attention.fusion, scores)
        attention = T.l2_normalize_rows(T.softmax_rows(regroup(fused)))
        attention3 = T.reshape(attention, (batch, d, kwh))
        aggregated = T.bmm(attention3, T.reshape(x_top, (batch, kwh, c_top)))
        maps = T.reshape(aggregated, (batch, d * c_top))

    hidden = T.relu(T.affine(maps, params.head_w1, params.head_b1))
    logits = T.affine(hidden, params.head_w2, params.head_b2)
    correct = int((logits.data.argmax(axis=1) == labels).sum())

    ce_sum = T.sum_all(cross_entropy_rows(logits, labels))
    objective = ce_sum
    inter_sum = div_sum = 0.0
    if params.aggregation == "attention" and config.enable_interactive:
        # penalty uses per-clip unit-Frobenius features, matching
        # losses.unit_frobenius in the per-clip composition
        x_unit = T.reshape(
            T.l2_normalize_rows(T.reshape(x_top, (batch, kwh * c_top))),
            (batch, kwh, c_top),
        )
        trace_term = T.neg(T.sum_all(T.square(T.bmm(attention3, x_unit))))
        gram = T.bmm(attention3, T.permute(attention3, (0, 2, 1)))
        off = T.sum_all(T.square(T.mul_const(gram, 1.0 - np.eye(d))))
        inter = T.add(trace_term, off)
        inter_sum = inter.item()
        objective = T.add(objective, T.mul_const(inter, config.beta))
    if params.aggregation == "attention" and config.enable_divergence:
        arg = Tensor(np.full(batch, float(len(scores) * d * kwh)))
        for y in scores:
            s_j = T.softmax_rows(regroup(y))
            sq = T.sum_rows(T.reshape(T.square(T.sub(attention, s_j)), (batch, d * kwh)))
            arg = T.sub(arg, sq)
        div = T.sum_all(T.sqrt_clamped(arg))
        div_sum = div.item()
        objective = T.add(objective, T.mul_const(div, config.gamma))

    objective = T.mul_const(objective, 1.0 / batch)
    decay = Tensor(0.0)
    for p in params.trainable():
        decay = T.add(decay, T.sum_all(T.square(p)))
    objective = T.add(objective, T.mul_const(decay, config.lambda_wd))
    means = (ce_sum.item() / batch, inter_sum / batch, div_sum / batch)
    return objective, means, decay.item(), correct


def fit(
    params: ModelParams,
    clips: list[ClipSample],
    config: TrainConfig,
    metrics_out: io.TextIOBase | None = None,
) -> list[dict]:
    """Run the SGD loop over the given clips; returns the metrics rows.

    Momentum update: v <- momentum*v - lr*g; w <- w + v. The learning rate
    is multiplied by lr_decay every decay_every iterations.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7124]))
    trainable = params.trainable()
    velocity = [np.zeros_like(t.data) for t in trainable]
    rows: list[dict] = []
    if metrics_out is not None:
        metrics_out.write(METRICS_HEADER + "\n")
    window: list[tuple[float, ...]] = []
    for it in range(1, config.iterations + 1):
        lr = config.lr * (config.lr_decay ** ((it - 1) // config.decay_every))
        idxs = rng.integers(0, len(clips), size=config.batch)
        batch_frames = np.stack(
            [
                clips[ci].frames[segment_sample(clips[ci].frames.shape[0], config.k_train, rng)]
                for ci in idxs
            ]
        )
        labels = np.array([clips[ci].label for ci in idxs])
        params.zero_grad()
        with Tape() as tape:
            objective, comp_means, decay, correct = _batched_objective(
                batch_frames, labels, params, config
            )
        tape.backward(objective)
        for t, vel in zip(trainable, velocity):
            g = t.grad if t.grad is not None else 0.0
            vel *= config.momentum
            vel -= lr * g
            t.data += vel
        window.append(
            (objective.item(), comp_means[0], decay, comp_means[1], comp_means[2],
             correct / config.batch)
        )
        if it % 50 == 0 or it == config.iterations:
            mean = np.mean(window, axis=0)
            row = {
                "iter": it,
                "total": mean[0],
                "ce": mean[1],
                "wd": mean[2],
                "interactive": mean[3],
                "divergence": mean[4],
                "acc": mean[5],
            }
            rows.append(row)
            if metrics_out is not None:
                metrics_out.write(
                    f"{it},{mean[0]:.10g},{mean[1]:.10g},{mean[2]:.10g},"
                    f"{mean[3]:.10g},{mean[4]:.10g},{mean[5]:.10g}\n"
                )
            window.clear()
    return rows


def train(config: TrainConfig, metrics_out: io.TextIOBase | None = None) -> tuple[ModelParams, list[dict]]:
    """Build the model and synthetic train corpus from the config seed, then fit."""
    config.validate()
    params = build_model(
        config.seed, scales=config.scales, fusion=config.fusion,
        aggregation=config.aggregation,
    )
    clips = generate_corpus(config.seed, config.train_clips, config.clip_len, split=0)
    rows = fit(params, clips, config, metrics_out=metrics_out)
    return params, rows


def predict_clip(params: ModelParams, clip: ClipSample, k_eval: int) -> int:
    picks = uniform_sample(clip.frames.shape[0], k_eval)
    logits, _ = forward_clip(Tensor(clip.frames[picks]), params)
    return int(np.argmax(logits.data))


def evaluate(
    params: ModelParams,
    config: TrainConfig,
    k_eval: int | None = None,
    clips: list[ClipSample] | None = None,
) -> tuple[float, np.ndarray]:
    """Accuracy and per-class confusion counts on the eval corpus.

    confusion[i][j] counts clips of true class i predicted as j.
    """
    k_eval = config.k_eval if k_eval is None else k_eval
    if clips is None:
        clips = generate_corpus(config.seed, config.eval_clips, config.clip_len, split=1)
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=int)
    for clip in clips:
        confusion[clip.label, predict_clip(params, clip, k_eval)] += 1
    accuracy = confusion.trace() / max(confusion.sum(), 1)
    return float(accuracy), confusion


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams, config: TrainConfig) -> None:
    """Text manifest (format version, config echo, tensor directory with
    byte offsets) followed by the concatenated little-endian float64 payload."""
    named = params.named()
    directory = []
    offset = 0
    for name, t in named.items():
        nbytes = t.data.size * 8
        directory.append({"name": name, "shape": list(t.data.shape), "offset": offset})
        offset += nbytes
    manifest = json.dumps(
        {
            "version": CHECKPOINT_VERSION,
            "config": config.to_dict(),
            "tensors": directory,
            "payload_bytes": offset,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for t in named.values():
            fh.write(t.data.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise IntegrityError(f"{path}: not a checkpoint file")
    pos = len(CHECKPOINT_MAGIC)
    if len(blob) < pos + 8:
        raise IntegrityError(f"{path}: truncated manifest header")
    (mlen,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if len(blob) < pos + mlen:
        raise IntegrityError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(blob[pos : pos + mlen])
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"{path}: corrupt manifest: {exc}") from exc
    pos += mlen
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise IntegrityError(f"{path}: unsupported version {manifest.get('version')}")
    payload = blob[pos:]
    if len(payload) != manifest["payload_bytes"]:
        raise IntegrityError(
            f"{path}: payload is {len(payload)} bytes, manifest says "
            f"{manifest['payload_bytes']}"
        )
    config = TrainConfig(**manifest["config"]).validate()
    params = build_model(
        config.seed, scales=config.scales, fusion=config.fusion,
        aggregation=config.aggregation,
    )
    named = params.named()
    if [e["name"] for e in manifest["tensors"]] != list(named.keys()):
        raise IntegrityError(f"{path}: tensor directory does not match the model")
    for entry in manifest["tensors"]:
        t = named[entry["name"]]
        shape = tuple(entry["shape"])
        if shape != t.data.shape:
            raise IntegrityError(
                f"{path}: tensor {entry['name']} has shape {shape}, model "
                f"expects {t.data.shape}"
            )
        count = t.data.size
        start = entry["offset"]
        if start + count * 8 > len(payload):
            raise IntegrityError(f"{path}: tensor {entry['name']} exceeds payload")
        t.data = np.frombuffer(payload, dtype="<f8", count=count, offset=start).reshape(shape).copy()
    return params, config
