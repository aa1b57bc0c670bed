"""Low-rank adaptation of a frozen linear feature map, with a small trainer.

An adapter keeps a frozen base matrix W0 (d x k) and trains a rank-r factor
pair so the effective weight is W0 + B A with A (r x k) and B (d x r). B
starts at zero, so a fresh adapter computes exactly the frozen map; the
factors can be merged into a plain matrix for inference at no extra cost.
Only r(d+k) backbone parameters train in adapter mode versus d*k for a full
update.

``train_classifier`` embodies the three fine-tuning strategies on a
desk-scale model: a frozen random linear feature map followed by a trainable
softmax head, where the backbone is left frozen, fully updated, or adapted
through a low-rank pair. Training is plain mini-batch gradient descent with a
fixed shuffle schedule, so runs are bit-reproducible under a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import FeatureBundle

TRAIN_MODES = ("frozen", "full", "lora")


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class LoraAdapter:
    """Frozen base matrix plus a trainable low-rank factor pair."""

    w0: np.ndarray
    a: np.ndarray
    b: np.ndarray
    rank: int

    def __post_init__(self):
        d, k = self.w0.shape
        if self.a.shape != (self.rank, k):
            raise ValueError(f"A must be {(self.rank, k)}, got {self.a.shape}")
        if self.b.shape != (d, self.rank):
            raise ValueError(f"B must be {(d, self.rank)}, got {self.b.shape}")


def lora_init(w0: np.ndarray, rank: int, seed: int) -> LoraAdapter:
    """Create an adapter whose initial forward equals the frozen map exactly.

    A is drawn from N(0, 1/rank) under the seed; B starts at zero so
    B A vanishes until training moves it.
    """
    w0 = np.asarray(w0, dtype=np.float64)
    d, k = w0.shape
    if not 1 <= rank <= min(d, k):
        raise ValueError(f"rank must be in [1, {min(d, k)}], got {rank}")
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, math.sqrt(1.0 / rank), size=(rank, k))
    b = np.zeros((d, rank))
    return LoraAdapter(w0=w0, a=a, b=b, rank=rank)


def lora_forward(adapter: LoraAdapter, x: np.ndarray) -> np.ndarray:
    """Adapted map W0 x + B (A x), computed through the narrow factors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != adapter.w0.shape[1]:
        raise ValueError(f"input has length {x.shape[0]}, expected {adapter.w0.shape[1]}")
    return adapter.w0 @ x + adapter.b @ (adapter.a @ x)


def lora_merge(adapter: LoraAdapter) -> np.ndarray:
    """Collapse the adapter into the plain matrix W0 + B A."""
    return adapter.w0 + adapter.b @ adapter.a


def param_counts(d: int, k: int, rank: int) -> tuple[int, int]:
    """Trainable parameters: (adapter pair r(d+k), full matrix d*k)."""
    if d < 1 or k < 1 or rank < 1:
        raise ValueError(f"dimensions must be positive, got d={d}, k={k}, r={rank}")
    return rank * (d + k), d * k


@dataclass(frozen=True)
class TrainConfig:
    """Optimization setup; ``mode`` picks which parameters train."""

    mode: str = "frozen"
    rank: int = 4
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


def parse_mode(text: str) -> tuple[str, int]:
    """Parse ``frozen``, ``full``, or ``lora:<rank>`` (bare ``lora`` means rank 4)."""
    if text in ("frozen", "full"):
        return text, 0
    if text == "lora":
        return "lora", 4
    if text.startswith("lora:"):
        return "lora", int(text.split(":", 1)[1])
    raise ValueError(f"unknown fine-tuning mode {text!r}")


def _forward_backward(
    w0: np.ndarray,
    a: np.ndarray | None,
    b: np.ndarray | None,
    head: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Softmax cross-entropy loss and gradients for one batch.

    Returns gradients for every tensor; the caller applies only those its
    mode trains. The adapted features are computed through the narrow
    factors, never materializing B A.
    """
    hidden = x @ w0.T
    if a is not None:
        hidden = hidden + (x @ a.T) @ b.T
    logits = hidden @ head.T
    logits = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1, keepdims=True))
    log_probs = logits - log_norm
    n = y.size
    loss = -float(log_probs[np.arange(n), y].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_head = delta.T @ hidden
    grad_hidden = delta @ head
    grads = {"head": grad_head, "w0": grad_hidden.T @ x}
    if a is not None:
        grads["b"] = grad_hidden.T @ (x @ a.T)
        grads["a"] = b.T @ (grad_hidden.T @ x)
    return loss, grads


@dataclass
class TrainedClassifier:
    """Fitted model with its loss history and parameter accounting.

    ``backbone_trainable`` counts only backbone parameters the mode updates
    (0 for frozen, r(d+k) for the adapter pair, d*k for a full update); the
    softmax head adds ``head_param_count`` trainables in every mode.
    """

    w0: np.ndarray
    a: np.ndarray | None
    b: np.ndarray | None
    head: np.ndarray
    mode: str
    rank: int
    loss_history: list[float] = field(default_factory=list)
    backbone_trainable: int = 0
    head_param_count: int = 0

    def hidden(self, features: np.ndarray) -> np.ndarray:
        out = features @ self.w0.T
        if self.a is not None:
            out = out + (features @ self.a.T) @ self.b.T
        return out

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self.hidden(features) @ self.head.T

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.logits(features).argmax(axis=1).astype(np.int64)


def train_classifier(
    features: FeatureBundle, config: TrainConfig, hidden: int
) -> TrainedClassifier:
    """Fit the desk-scale classifier under the configured fine-tuning mode.

    The frozen base map W0 (hidden x D, entries N(0, 1/D)) and the epoch
    shuffle schedule both derive from ``config.seed``; in adapter mode the
    factor pair is seeded with ``config.seed + 1``. The head starts at zero,
    so with zero epochs the model predicts from the untouched initialization.
    """
    if features.n == 0:
        raise ValueError("feature bundle is empty")
    x = features.features
    y = features.labels
    n, dim = x.shape
    k_classes = features.num_classes

    rng = np.random.default_rng(config.seed)
    w0 = rng.normal(0.0, math.sqrt(1.0 / dim), size=(hidden, dim))
    a = b = None
    if config.mode == "lora":
        adapter = lora_init(w0, config.rank, config.seed + 1)
        a, b = adapter.a.copy(), adapter.b.copy()
    elif config.mode == "full":
        w0 = w0.copy()
    head = np.zeros((k_classes, hidden))

    lora_params, full_params = param_counts(hidden, dim, config.rank if config.mode == "lora" else 1)
    backbone = {"frozen": 0, "full": full_params, "lora": lora_params}[config.mode]

    lr = config.learning_rate
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = _forward_backward(w0, a, b, head, x[batch], y[batch])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start} "
                    f"(mode={config.mode}, lr={lr})"
                )
            epoch_loss += loss * batch.size
            head -= lr * grads["head"]
            if config.mode == "full":
                w0 -= lr * grads["w0"]
            elif config.mode == "lora":
                a -= lr * grads["a"]
                b -= lr * grads["b"]
        history.append(epoch_loss / n)

    return TrainedClassifier(
        w0=w0,
        a=a,
        b=b,
        head=head,
        mode=config.mode,
        rank=config.rank if config.mode == "lora" else 0,
        loss_history=history,
        backbone_trainable=backbone,
        head_param_count=k_classes * hidden,
    )


def standardize_features(
    train: FeatureBundle, *others: FeatureBundle
) -> tuple[FeatureBundle, ...]:
    """Z-score bundles using the training bundle's per-feature statistics.

    Constant features are left centered but unscaled. Gradient training on
    raw statistics features needs this: their scales differ by orders of
    magnitude.
    """
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)

    def apply(bundle: FeatureBundle) -> FeatureBundle:
        return FeatureBundle(
            (bundle.features - mean) / std,
            bundle.labels,
            bundle.num_classes,
            bundle.extractor_id,
            bundle.source_hash,
        )

    return tuple(apply(bundle) for bundle in (train, *others))
