"""scikit-learn style wrapper so the attention classifier composes with
pipelines, cross-validation and grid search."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .data import FRAME_SIZE, ClipSample
from .errors import DimensionError
from .trainer import TrainConfig, fit, predict_clip
from .model import build_model


def check_clip_array(X) -> np.ndarray:
    """Validate and coerce clips to (n, K, 32, 32, 1) float64 in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 4:
        X = X[..., None]
    if X.ndim != 5 or X.shape[2] != FRAME_SIZE or X.shape[3] != FRAME_SIZE or X.shape[4] != 1:
        raise DimensionError(
            f"expected clips of shape (n, K, {FRAME_SIZE}, {FRAME_SIZE}[, 1]), got {X.shape}"
        )
    if not np.isfinite(X).all():
        raise DimensionError("clip array contains non-finite values")
    return X


class PyramidAttentionVideoClassifier(ClassifierMixin, BaseEstimator):
    """Video-clip classifier built on the pyramid-attention toy network.

    Parameters mirror the training config; `fit` expects an array of clips
    of shape (n, K, 32, 32) or (n, K, 32, 32, 1) with integer labels.
    """

    def __init__(
        self,
        k_train=3,
        k_eval=8,
        scales=3,
        fusion="multiplication",
        lr=0.01,
        lr_decay=0.1,
        decay_every=100,
        momentum=0.9,
        lambda_wd=4e-5,
        beta=1e-3,
        gamma=1e-4,
        batch=16,
        iterations=250,
        seed=7,
        enable_interactive=True,
        enable_divergence=True,
        aggregation="attention",
    ):
        self.k_train = k_train
        self.k_eval = k_eval
        self.scales = scales
        self.fusion = fusion
        self.lr = lr
        self.lr_decay = lr_decay
        self.decay_every = decay_every
        self.momentum = momentum
        self.lambda_wd = lambda_wd
        self.beta = beta
        self.gamma = gamma
        self.batch = batch
        self.iterations = iterations
        self.seed = seed
        self.enable_interactive = enable_interactive
        self.enable_divergence = enable_divergence
        self.aggregation = aggregation

    def _config(self, clip_len: int) -> TrainConfig:
        return TrainConfig(
            k_train=self.k_train,
            k_eval=self.k_eval,
            scales=self.scales,
            fusion=self.fusion,
            lr=self.lr,
            lr_decay=self.lr_decay,
            decay_every=self.decay_every,
            momentum=self.momentum,
            lambda_wd=self.lambda_wd,
            beta=self.beta,
            gamma=self.gamma,
            batch=self.batch,
            iterations=self.iterations,
            seed=self.seed,
            enable_interactive=self.enable_interactive,
            enable_divergence=self.enable_divergence,
            clip_len=clip_len,
            aggregation=self.aggregation,
        ).validate()

    def fit(self, X, y):
        X = check_clip_array(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise DimensionError(f"labels shape {y.shape} does not match {X.shape[0]} clips")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        config = self._config(clip_len=X.shape[1])
        clips = [
            ClipSample(frames=X[i], label=int(encoded[i]), boxes=[])
            for i in range(X.shape[0])
        ]
        self.params_ = build_model(
            config.seed, scales=config.scales, fusion=config.fusion,
            aggregation=config.aggregation,
        )
        self.history_ = fit(self.params_, clips, config)
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict")
        X = check_clip_array(X)
        preds = [
            predict_clip(self.params_, ClipSample(frames=X[i], label=0, boxes=[]), self.k_eval)
            for i in range(X.shape[0])
        ]
        return self.classes_[np.asarray(preds)]
