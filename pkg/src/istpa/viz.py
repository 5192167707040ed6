"""Salient-receptive-field export: map attention columns back to
(frame, x, y), threshold, and emit PGM heatmaps plus a JSON report.

Thresholds apply to row-max-rescaled scores so the 0.5/0.7 constants stay
meaningful at any spatial size; raw scores are preserved in the dump.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .attention import unflatten_index
from .errors import ContractError, ParameterError

MODES = ("per-frame", "per-position")
BACKBONE_STRIDE = 8  # cumulative stride from input pixels to the top level
STAMP = 1            # half-width of the 3x3 brightening stamp


@dataclass
class SalienceEntry:
    position: int        # output row m, i.e. (w_m, h_m) flattened
    frame: int
    w: int
    h: int
    score_raw: float
    score_rescaled: float


@dataclass
class SalienceReport:
    threshold: float
    mode: str
    k: int
    width: int
    height: int
    entries: list[SalienceEntry] = field(default_factory=list)


def column_to_position(p: int, k: int, width: int, height: int) -> tuple[int, int, int]:
    """Invert the flattening p = frame*(W*H) + w*H + h."""
    if not 0 <= p < k * width * height:
        raise ContractError(f"column {p} out of range for K={k}, W={width}, H={height}")
    return unflatten_index(p, width, height)


def extract_salient_fields(
    attention: np.ndarray,
    threshold: float,
    k: int,
    width: int,
    height: int,
    mode: str = "per-frame",
) -> SalienceReport:
    """Collect attention entries whose row-max-rescaled score exceeds the
    threshold.

    per-frame mode fixes the output position (w_m, h_m) = (0, 0) and sweeps
    all frames; per-position mode fixes frame 0 and sweeps all output
    positions.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must lie in (0, 1), got {threshold}")
    attention = np.asarray(attention, dtype=np.float64)
    if attention.shape != (width * height, k * width * height):
        raise ContractError(
            f"attention shape {attention.shape} does not match "
            f"(W*H, K*W*H) = {(width * height, k * width * height)}"
        )
    rescaled = attention / np.maximum(attention.max(axis=1, keepdims=True), 1e-300)
    report = SalienceReport(threshold=threshold, mode=mode, k=k, width=width, height=height)
    rows = [0] if mode == "per-frame" else range(width * height)
    for m in rows:
        for p in range(k * width * height):
            kj, wj, hj = unflatten_index(p, width, height)
            if mode == "per-position" and kj != 0:
                continue
            if rescaled[m, p] > threshold:
                report.entries.append(
                    SalienceEntry(
                        position=m,
                        frame=kj,
                        w=wj,
                        h=hj,
                        score_raw=float(attention[m, p]),
                        score_rescaled=float(rescaled[m, p]),
                    )
                )
    return report


def report_to_dict(report: SalienceReport) -> dict:
    return {
        "threshold": report.threshold,
        "mode": report.mode,
        "k": report.k,
        "width": report.width,
        "height": report.height,
        "entries": [
            [e.position, e.frame, e.w, e.h, e.score_raw, e.score_rescaled]
            for e in report.entries
        ],
    }


def report_from_dict(raw: dict) -> SalienceReport:
    report = SalienceReport(
        threshold=raw["threshold"],
        mode=raw["mode"],
        k=raw["k"],
        width=raw["width"],
        height=raw["height"],
    )
    for position, frame, w, h, score_raw, score_rescaled in raw["entries"]:
        report.entries.append(
            SalienceEntry(position, frame, w, h, score_raw, score_rescaled)
        )
    return report


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5 portable graymap, maxval 255."""
    img = np.clip(np.asarray(image), 0, 255).astype(np.uint8)
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            fh.write(img.tobytes())
    except OSError as exc:
        raise OSError(f"failed writing heatmap {path}: {exc}") from exc


def emit_heatmaps(report: SalienceReport, frames: np.ndarray, out_dir) -> list[str]:
    """Write frame_<k>.pgm per frame (salient centers brightened to 255 over
    a 3x3 stamp) plus salience.json with the full report."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 4:
        frames = frames[..., 0]
    os.makedirs(out_dir, exist_ok=True)
    images = np.round(frames * 255.0)
    size = frames.shape[1]
    for e in report.entries:
        cw, ch = e.w * BACKBONE_STRIDE, e.h * BACKBONE_STRIDE
        w0, w1 = max(cw - STAMP, 0), min(cw + STAMP + 1, size)
        h0, h1 = max(ch - STAMP, 0), min(ch + STAMP + 1, size)
        images[e.frame, w0:w1, h0:h1] = 255.0
    written = []
    for kj in range(frames.shape[0]):
        path = os.path.join(out_dir, f"frame_{kj}.pgm")
        write_pgm(path, images[kj])
        written.append(path)
    json_path = os.path.join(out_dir, "salience.json")
    try:
        with open(json_path, "w") as fh:
            json.dump(report_to_dict(report), fh, indent=1)
    except OSError as exc:
        raise OSError(f"failed writing report {json_path}: {exc}") from exc
    written.append(json_path)
    return written


def attention_box_mass(
    attention: np.ndarray,
    boxes: list[tuple[int, int, int, int]],
    k: int,
    width: int,
    height: int,
    frame_size: int,
) -> tuple[float, float]:
    """Fraction of total attention mass whose receptive-field block overlaps
    the per-frame ground-truth box, and the chance fraction (overlapping
    cells over all cells). Uniform attention scores exactly at chance."""
    attention = np.asarray(attention, dtype=np.float64)
    stride = frame_size // width
    inside = np.zeros(k * width * height, dtype=bool)
    for p in range(inside.size):
        kj, wj, hj = unflatten_index(p, width, height)
        w0, h0, w1, h1 = boxes[kj]
        bw0, bh0 = wj * stride, hj * stride
        inside[p] = bw0 < w1 and bw0 + stride > w0 and bh0 < h1 and bh0 + stride > h0
    mass = attention[:, inside].sum() / attention.sum()
    chance = inside.mean()
    return float(mass), float(chance)
