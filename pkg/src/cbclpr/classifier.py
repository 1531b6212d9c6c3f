"""Single-layer softmax classifier trained with minibatch SGD + momentum.

Implemented directly on numpy so that training is deterministic given the
config seed: same seed, same shuffles, same final weights bit-for-bit
(within one build on one machine).  Checkpoints serialize to a small binary
format (magic ``CBLC``) with row-major binary32 weights followed by the
bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import struct

import numpy as np

from .features import FeatureDataset

MAGIC_CLASSIFIER = b"CBLC"
CLASSIFIER_VERSION = 1
_CLF_HEADER = struct.Struct("<4sIIII")  # magic, version, dim, t, use_bias


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float
    batch_size: int
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class TrainResult:
    final_loss: float
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class LinearClassifier:
    """Weight matrix (t, dim) plus optional bias of length t."""

    weights: np.ndarray
    bias: np.ndarray
    use_bias: bool = True

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def t(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def initialize(
        cls, dim: int, t: int, seed: int = 0, use_bias: bool = True
    ) -> "LinearClassifier":
        """Fan-in uniform init in [-1/sqrt(dim), 1/sqrt(dim)], zero bias."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(dim)
        return cls(rng.uniform(-bound, bound, (t, dim)), np.zeros(t), use_bias)


def logits(clf: LinearClassifier, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != clf.dim:
        raise ValueError(f"vector dim {x.shape[-1]} != classifier dim {clf.dim}")
    return x @ clf.weights.T + clf.bias


def predict_proba(clf: LinearClassifier, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities; rows sum to 1."""
    z = logits(clf, x)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(clf: LinearClassifier, vector: np.ndarray) -> int:
    """Argmax class for one vector; ties go to the lowest class index."""
    return int(np.argmax(logits(clf, vector)))


def predict_batch(clf: LinearClassifier, x: np.ndarray) -> np.ndarray:
    return np.argmax(logits(clf, x), axis=1)


def cross_entropy_and_grads(clf, x, y):
    """Mean softmax cross-entropy on a batch and its parameter gradients.

    Non-finite parameters propagate to a non-finite loss rather than
    warn; the training loop detects that and aborts with diagnostics.
    """
    z = logits(clf, x)
    n = len(y)
    with np.errstate(over="ignore", invalid="ignore"):
        zmax = z.max(axis=1, keepdims=True)
        log_norm = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        loss = float(np.mean(log_norm - z[np.arange(n), y]))
        p = np.exp(z - log_norm[:, None])
        p[np.arange(n), y] -= 1.0
        p /= n
        return loss, p.T @ x, p.sum(axis=0)


def train(
    clf: LinearClassifier, data: FeatureDataset, config: TrainConfig
) -> TrainResult:
    """SGD with momentum on softmax cross-entropy, shuffling every epoch.

    Mutates `clf` in place; returns the per-epoch mean losses, the last of
    which is the final average loss.
    """
    if data.labels.max() >= clf.t:
        raise ValueError(
            f"label {int(data.labels.max())} out of range for {clf.t} classes"
        )
    x = data.vectors.astype(np.float64)
    y = data.labels
    rng = np.random.default_rng(config.seed)
    vel_w = np.zeros_like(clf.weights)
    vel_b = np.zeros_like(clf.bias)
    epoch_losses = []
    for epoch in range(config.epochs):
        perm = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grad_w, grad_b = cross_entropy_and_grads(clf, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {start // config.batch_size} "
                    f"(lr={config.learning_rate}, batch={config.batch_size})"
                )
            total += loss * len(idx)
            vel_w = config.momentum * vel_w - config.learning_rate * grad_w
            clf.weights += vel_w
            if clf.use_bias:
                vel_b = config.momentum * vel_b - config.learning_rate * grad_b
                clf.bias += vel_b
        epoch_losses.append(total / len(y))
    return TrainResult(epoch_losses[-1], epoch_losses)


def grow(clf: LinearClassifier, new_t: int) -> LinearClassifier:
    """Add zero-initialized output rows, preserving the existing ones."""
    if new_t <= clf.t:
        raise ValueError(f"new_t {new_t} must exceed current {clf.t}")
    weights = np.zeros((new_t, clf.dim))
    weights[: clf.t] = clf.weights
    bias = np.zeros(new_t)
    bias[: clf.t] = clf.bias
    clf.weights = weights
    clf.bias = bias
    return clf


@dataclass
class EvalResult:
    accuracy: float
    per_class: dict[int, float]


def evaluate(clf: LinearClassifier, test: FeatureDataset) -> EvalResult:
    """Top-1 accuracy overall and per class."""
    predicted = predict_batch(clf, test.vectors)
    correct = predicted == test.labels
    per_class = {
        c: float(correct[test.labels == c].mean()) for c in test.class_ids
    }
    return EvalResult(float(correct.mean()), per_class)


def save_classifier(clf: LinearClassifier, path) -> None:
    header = _CLF_HEADER.pack(
        MAGIC_CLASSIFIER, CLASSIFIER_VERSION, clf.dim, clf.t, int(clf.use_bias)
    )
    body = clf.weights.astype("<f4").tobytes() + clf.bias.astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_classifier(path) -> LinearClassifier:
    raw = Path(path).read_bytes()
    magic, version, dim, t, use_bias = _CLF_HEADER.unpack_from(raw)
    if magic != MAGIC_CLASSIFIER:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != CLASSIFIER_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _CLF_HEADER.size + 4 * t * dim + 4 * t
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(raw)}")
    weights = np.frombuffer(raw, "<f4", t * dim, _CLF_HEADER.size)
    bias = np.frombuffer(raw, "<f4", t, _CLF_HEADER.size + 4 * t * dim)
    return LinearClassifier(
        weights.astype(np.float64).reshape(t, dim),
        bias.astype(np.float64),
        bool(use_bias),
    )
