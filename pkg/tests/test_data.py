"""Synthetic clip generator determinism, content checks, and the binary
corpus format."""

import numpy as np
import pytest

from istpa.data import (
    FRAME_SIZE,
    MAGIC,
    NUM_CLASSES,
    generate_clip,
    generate_corpus,
    load_corpus,
    save_corpus,
)
from istpa.errors import IntegrityError, ParameterError

def test_generation_is_bit_identical():
    a = generate_clip(seed=7, index=3, label=1, k=8)
    b = generate_clip(seed=7, index=3, label=1, k=8)
    assert a.frames.tobytes() == b.frames.tobytes()
    assert a.boxes == b.boxes


def test_seed_index_and_split_all_matter():
    base = generate_clip(seed=7, index=0, label=0, k=4)
    assert not np.array_equal(base.frames, generate_clip(8, 0, 0, 4).frames)
    assert not np.array_equal(base.frames, generate_clip(7, 1, 0, 4).frames)
    assert not np.array_equal(base.frames, generate_clip(7, 0, 0, 4, split=1).frames)


def test_clip_shape_and_range():
    clip = generate_clip(seed=1, index=0, label=2, k=5)
    assert clip.frames.shape == (5, FRAME_SIZE, FRAME_SIZE, 1)
    assert clip.frames.min() >= 0.0 and clip.frames.max() <= 1.0
    assert len(clip.boxes) == 5


def test_boxes_contain_bright_pixels():
    for label in range(NUM_CLASSES):
        clip = generate_clip(seed=3, index=label, label=label, k=4)
        for t, (w0, h0, w1, h1) in enumerate(clip.boxes):
            box = clip.frames[t, w0:w1, h0:h1, 0]
            assert (box == 1.0).any(), f"label {label} frame {t} has no shape pixels"
            outside = clip.frames[t].copy()
            outside[w0:w1, h0:h1] = 0.0
            # noise is clipped gaussian, almost surely below 1.0 everywhere
            assert outside.max() < 1.0


def test_shape_moves_between_frames():
    clip = generate_clip(seed=2, index=1, label=0, k=6)
    assert len(set(clip.boxes)) > 1


def test_corpus_round_robin_labels():
    clips = generate_corpus(seed=7, count=9, k=2)
    assert [c.label for c in clips] == [0, 1, 2] * 3


def test_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        generate_clip(seed=0, index=0, label=5, k=2)
    with pytest.raises(ParameterError):
        generate_clip(seed=0, index=0, label=0, k=0)


class TestCorpusFile:
    def test_round_trip(self, tmp_path):
        clips = generate_corpus(seed=11, count=6, k=3)
        path = tmp_path / "corpus.bin"
        save_corpus(path, clips)
        loaded = load_corpus(path)
        assert len(loaded) == 6
        for orig, back in zip(clips, loaded):
            assert back.label == orig.label
            np.testing.assert_array_equal(back.frames, orig.frames)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTACORPUS" + b"\x00" * 64)
        with pytest.raises(IntegrityError):
            load_corpus(path)

    def test_truncated_payload_rejected(self, tmp_path):
        clips = generate_corpus(seed=1, count=2, k=2)
        path = tmp_path / "corpus.bin"
        save_corpus(path, clips)
        blob = path.read_bytes()
        path.write_bytes(blob[:-100])
        with pytest.raises(IntegrityError):
            load_corpus(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        clips = generate_corpus(seed=1, count=2, k=2)
        path = tmp_path / "corpus.bin"
        save_corpus(path, clips)
        path.write_bytes(path.read_bytes() + b"\x01")
        with pytest.raises(IntegrityError):
            load_corpus(path)

    def test_empty_corpus_rejected(self, tmp_path):
        with pytest.raises(ParameterError):
            save_corpus(tmp_path / "x.bin", [])

    def test_magic_prefix_present(self, tmp_path):
        path = tmp_path / "corpus.bin"
        save_corpus(path, generate_corpus(seed=1, count=1, k=1))
        assert path.read_bytes().startswith(MAGIC)
