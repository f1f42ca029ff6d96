"""Pluggable semantic predictor producing per-pixel log-probabilities.

The trainable reference implementation is a softmax regression over the 95
superpixel histogram features (constant within each superpixel), standing in
for an external deep model.  A file-backed path loads log-probability maps
produced by any outside predictor.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import errors
from .features import FEATURE_DIM, superpixel_features

LOGPROB_MAGIC = b"SLPB"


@dataclass
class LogProbMap:
    """(h, w, L) per-pixel log-probabilities; exp-sums to 1 per pixel.

    ``labels`` binds columns to category ids; None means positional binding
    to the image's ascending scribbled universe.
    """

    values: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise errors.DimensionMismatch(f"expected (h, w, L), got {self.values.shape}")

    def validate(self, tol=1e-6):
        if not np.isfinite(self.values).all():
            raise errors.NonFiniteLogProb("log-probabilities must be finite")
        sums = np.exp(self.values).sum(axis=2)
        if not np.allclose(sums, 1.0, atol=tol, rtol=0.0):
            worst = float(np.abs(sums - 1.0).max())
            raise errors.NotNormalized(f"per-pixel exp-sum off by {worst:.3g}")


@dataclass
class PredictorConfig:
    # full-batch descent on 95-dim histogram features; a smaller lr*epochs
    # budget underfits rare classes against the background-heavy balance
    learning_rate: float = 1.0
    epochs: int = 2000
    l2: float = 1e-4


@dataclass
class RefPredictorModel:
    """Softmax regression weights, one row per universe label (+ bias column)."""

    universe: list
    weights: np.ndarray  # (L, FEATURE_DIM + 1)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.universe), FEATURE_DIM + 1):
            raise errors.ShapeMismatch(
                f"weights {self.weights.shape} vs universe of {len(self.universe)}")


def _log_softmax(z):
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict(model, image, spmap, feats=None, labels=None):
    """Per-pixel log-probabilities over ``labels`` (default: model universe).

    Each pixel receives the log-softmax of its superpixel's logits; softmax
    over a label subset equals restriction plus renormalization.
    """
    if labels is None:
        labels = list(model.universe)
    pos = {c: i for i, c in enumerate(model.universe)}
    missing = [c for c in labels if c not in pos]
    if missing:
        raise errors.UniverseMismatch(f"labels {missing} not covered by model universe")
    if feats is None:
        feats = superpixel_features(image, spmap)
    rows = [pos[c] for c in labels]
    w = model.weights[rows]
    logits = feats @ w[:, :FEATURE_DIM].T + w[:, FEATURE_DIM]
    logp = _log_softmax(logits)  # (S, L)
    values = logp[spmap.ids]
    return LogProbMap(values, list(labels))


def cross_entropy_loss_grad(weights, feats1, y, l2):
    """Mean cross-entropy (plus l2 on non-bias weights) and its gradient.

    ``feats1`` is the (N, F+1) design matrix with the bias column appended.
    """
    n = feats1.shape[0]
    logp = _log_softmax(feats1 @ weights.T)
    loss = -logp[np.arange(n), y].mean()
    p = np.exp(logp)
    p[np.arange(n), y] -= 1.0
    grad = p.T @ feats1 / n
    reg = weights.copy()
    reg[:, FEATURE_DIM] = 0.0  # bias is not regularized
    loss += 0.5 * l2 * float((reg ** 2).sum())
    grad += l2 * reg
    return loss, grad


def train(examples, universe, config=None):
    """Full-batch gradient descent from zero weights on (features, label) pairs.

    The model is re-initialized from scratch on every call; labels are
    indices into ``universe``.
    """
    if config is None:
        config = PredictorConfig()
    if len(examples) == 0:
        raise errors.EmptyTrainingSet("no training examples")
    feats = np.asarray([f for f, _ in examples], dtype=np.float64)
    y = np.asarray([l for _, l in examples], dtype=np.int64)
    num_labels = len(universe)
    if feats.ndim != 2 or feats.shape[1] != FEATURE_DIM:
        raise errors.ShapeMismatch(f"feature vectors must have length {FEATURE_DIM}")
    if y.min() < 0 or y.max() >= num_labels:
        raise errors.LabelOutOfRange(f"label index outside [0, {num_labels})")

    feats1 = np.concatenate([feats, np.ones((len(feats), 1))], axis=1)
    weights = np.zeros((num_labels, FEATURE_DIM + 1), dtype=np.float64)
    for _ in range(config.epochs):
        _, grad = cross_entropy_loss_grad(weights, feats1, y, config.l2)
        weights -= config.learning_rate * grad
    return RefPredictorModel(list(universe), weights)


# ---------------------------------------------------------------------------
# model / log-prob file I/O

def save_model(model, path):
    obj = {"universe": [int(c) for c in model.universe],
           "weights": model.weights.tolist()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f)
        f.write("\n")


def load_model(path):
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise errors.SchemaViolation(f"{path}: invalid JSON: {e}") from e
    if not isinstance(obj, dict) or "universe" not in obj or "weights" not in obj:
        raise errors.SchemaViolation(f"{path}: expected {{universe, weights}}")
    return RefPredictorModel(obj["universe"], np.asarray(obj["weights"], dtype=np.float64))


def save_logprob_file(logprob, path):
    """Binary log-prob map: magic, u32 w/h/L, float32 values pixel-major."""
    h, w, num_labels = logprob.values.shape
    with open(path, "wb") as f:
        f.write(LOGPROB_MAGIC)
        f.write(struct.pack("<III", w, h, num_labels))
        f.write(logprob.values.astype("<f4").tobytes())


def load_logprob_file(path, drift_tol=1e-3):
    """Read and validate a binary log-prob map.

    Per-pixel exp-sums within ``drift_tol`` of 1 are renormalized; anything
    further off is rejected.
    """
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != LOGPROB_MAGIC:
        raise errors.SchemaViolation(f"{path}: bad magic or truncated header")
    w, h, num_labels = struct.unpack("<III", data[4:16])
    expected = 16 + w * h * num_labels * 4
    if len(data) != expected:
        raise errors.SchemaViolation(
            f"{path}: size {len(data)} does not match header ({expected} expected)")
    values = np.frombuffer(data, dtype="<f4", offset=16).astype(np.float64)
    values = values.reshape(h, w, num_labels)
    if not np.isfinite(values).all():
        raise errors.NonFiniteLogProb(f"{path}: non-finite log-probability")
    sums = np.exp(values).sum(axis=2)
    drift = np.abs(sums - 1.0).max() if sums.size else 0.0
    if drift > drift_tol:
        raise errors.NotNormalized(f"{path}: per-pixel exp-sum off by {float(drift):.4g}")
    if drift > 0:
        values = values - np.log(sums)[:, :, None]
    lp = LogProbMap(values)
    lp.validate()
    return lp
