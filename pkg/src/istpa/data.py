"""Deterministic synthetic video clips: one moving bright shape per clip
over Gaussian noise, labeled by shape identity.

Generation is pure given (seed, clip index), so corpora are identical
across runs and worker counts. An optional binary export format serializes
a whole split to one file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ParameterError

FRAME_SIZE = 32
NUM_CLASSES = 3
NOISE_SIGMA = 0.1
MAGIC = b"ISTPA-DS1"

CLASS_NAMES = ("square", "cross", "bar")


@dataclass
class ClipSample:
    """K grayscale frames, a class label, and per-frame shape bounding boxes."""

    frames: np.ndarray   # (K, 32, 32, 1) float64 in [0, 1]
    label: int
    boxes: list[tuple[int, int, int, int]]  # (w0, h0, w1, h1), exclusive upper bounds


def _draw_shape(frame: np.ndarray, label: int, w0: int, h0: int, size: int) -> tuple[int, int, int, int]:
    if label == 0:  # filled square
        frame[w0 : w0 + size, h0 : h0 + size] = 1.0
    elif label == 1:  # plus-shaped cross
        arm = max(size // 3, 1)
        mid_w = w0 + (size - arm) // 2
        mid_h = h0 + (size - arm) // 2
        frame[mid_w : mid_w + arm, h0 : h0 + size] = 1.0
        frame[w0 : w0 + size, mid_h : mid_h + arm] = 1.0
    elif label == 2:  # horizontal bar
        bar = max(size // 3, 1)
        mid_w = w0 + (size - bar) // 2
        frame[mid_w : mid_w + bar, h0 : h0 + size] = 1.0
    else:
        raise ParameterError(f"unknown class {label}")
    return (w0, h0, w0 + size, h0 + size)


def generate_clip(seed: int, index: int, label: int, k: int, split: int = 0) -> ClipSample:
    """One clip: the class shape translated by a per-clip velocity over K
    frames, on clipped Gaussian noise. Deterministic given (seed, index)."""
    if k < 1:
        raise ParameterError(f"clip length must be >= 1, got {k}")
    if not 0 <= label < NUM_CLASSES:
        raise ParameterError(f"label {label} out of range")
    rng = np.random.default_rng(np.random.SeedSequence([seed, split, index]))
    size = int(rng.integers(6, 11))
    # positions wrap modulo the valid start range so the shape stays whole
    span = FRAME_SIZE - size
    start = rng.integers(0, span + 1, size=2)
    velocity = rng.integers(-3, 4, size=2)
    frames = np.clip(rng.normal(0.0, NOISE_SIGMA, size=(k, FRAME_SIZE, FRAME_SIZE)), 0.0, 1.0)
    boxes = []
    for t in range(k):
        w0 = int((start[0] + t * velocity[0]) % (span + 1))
        h0 = int((start[1] + t * velocity[1]) % (span + 1))
        boxes.append(_draw_shape(frames[t], label, w0, h0, size))
    return ClipSample(frames=frames[..., None], label=label, boxes=boxes)


def generate_corpus(seed: int, count: int, k: int, split: int = 0) -> list[ClipSample]:
    """Round-robin labels over ``count`` clips, so class balance is exact."""
    return [
        generate_clip(seed, index, index % NUM_CLASSES, k, split=split)
        for index in range(count)
    ]


def save_corpus(path, clips: list[ClipSample]) -> None:
    """Header: magic, then K, count, class count as little-endian uint32;
    per clip one label byte followed by raw little-endian float64 frames."""
    if not clips:
        raise ParameterError("refusing to write an empty corpus")
    k = clips[0].frames.shape[0]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", k, len(clips), NUM_CLASSES))
        for clip in clips:
            if clip.frames.shape[0] != k:
                raise ParameterError("all clips in a split must share K")
            fh.write(struct.pack("<B", clip.label))
            fh.write(clip.frames.astype("<f8").tobytes())


def load_corpus(path) -> list[ClipSample]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: bad magic, not a corpus file")
    k, count, classes = struct.unpack_from("<III", blob, len(MAGIC))
    if classes != NUM_CLASSES:
        raise IntegrityError(f"{path}: unexpected class count {classes}")
    frame_bytes = k * FRAME_SIZE * FRAME_SIZE * 8
    offset = len(MAGIC) + 12
    clips = []
    for _ in range(count):
        if offset + 1 + frame_bytes > len(blob):
            raise IntegrityError(f"{path}: truncated corpus payload")
        label = blob[offset]
        offset += 1
        frames = np.frombuffer(blob, dtype="<f8", count=k * FRAME_SIZE * FRAME_SIZE, offset=offset)
        offset += frame_bytes
        clips.append(
            ClipSample(
                frames=frames.reshape(k, FRAME_SIZE, FRAME_SIZE, 1).copy(),
                label=int(label),
                boxes=[],
            )
        )
    if offset != len(blob):
        raise IntegrityError(f"{path}: trailing bytes after corpus payload")
    return clips
