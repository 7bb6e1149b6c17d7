"""
Softmax-regression training engine.

Pure functions on immutable inputs; safe to call from any number of worker threads.
Flat layout everywhere: weights row-major by class, then biases.
"""

from dataclasses import dataclass

import numpy as np

from gradmesh.core.constants import FINITE_DIFF_EPS, INIT_WEIGHT_RANGE
from gradmesh.core.exceptions import ConfigurationError, ContractError

Dims = tuple[int, int]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ModelParams:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = _frozen(self.weights)
        bias = _frozen(self.bias)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ContractError(f"weights {weights.shape} and bias {bias.shape} do not describe one model")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ContractError("model parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def dims(self) -> Dims:
        return int(self.weights.shape[0]), int(self.weights.shape[1])

    @property
    def size(self) -> int:
        classes, features = self.dims
        return classes * (features + 1)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    @classmethod
    def from_flat(cls, values: np.ndarray, dims: Dims) -> "ModelParams":
        classes, features = dims
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (classes * (features + 1),):
            raise ContractError(f"flat params of length {values.size} do not match dims {dims}")
        split = classes * features
        return cls(weights=values[:split].reshape(classes, features), bias=values[split:])

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise equality."""
        return self.dims == other.dims and self.flat().tobytes() == other.flat().tobytes()


@dataclass(frozen=True)
class GradientVector:
    values: np.ndarray
    dims: Dims

    def __post_init__(self):
        values = _frozen(self.values)
        classes, features = self.dims
        if values.shape != (classes * (features + 1),):
            raise ContractError(f"gradient of length {values.size} does not match dims {self.dims}")
        if not np.all(np.isfinite(values)):
            raise ContractError("gradient entries must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dims", (int(classes), int(features)))

    @classmethod
    def zeros(cls, dims: Dims) -> "GradientVector":
        classes, features = dims
        return cls(values=np.zeros(classes * (features + 1)), dims=dims)

    def __len__(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class Minibatch:
    examples: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        examples = _frozen(self.examples)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        labels.setflags(write=False)
        if examples.ndim != 2 or labels.shape != (examples.shape[0],):
            raise ContractError(f"examples {examples.shape} and labels {labels.shape} disagree")
        if examples.shape[0] < 1:
            raise ContractError("a minibatch holds at least one example")
        object.__setattr__(self, "examples", examples)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.labels.size)

    def concat(self, other: "Minibatch") -> "Minibatch":
        return Minibatch(
            examples=np.vstack([self.examples, other.examples]),
            labels=np.concatenate([self.labels, other.labels]),
        )


def _check_batch(params: ModelParams, batch: Minibatch) -> None:
    classes, features = params.dims
    if batch.examples.shape[1] != features:
        raise ContractError(f"batch has {batch.examples.shape[1]} features, model expects {features}")
    if batch.labels.min() < 0 or batch.labels.max() >= classes:
        raise ContractError(f"labels must lie in [0, {classes})")


def _logits(params: ModelParams, examples: np.ndarray) -> np.ndarray:
    return examples @ params.weights.T + params.bias


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def init_model(classes: int, features: int, seed: int) -> ModelParams:
    """Small symmetric uniform init; identical seeds give bitwise-identical params."""
    if classes < 2 or features < 1:
        raise ConfigurationError(f"need classes >= 2 and features >= 1, got ({classes}, {features})")
    rng = np.random.default_rng(seed)
    flat = rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, size=classes * (features + 1))
    return ModelParams.from_flat(flat, (classes, features))


def compute_loss(params: ModelParams, batch: Minibatch) -> float:
    """Mean softmax cross-entropy over the batch."""
    _check_batch(params, batch)
    logits = _logits(params, batch.examples)
    peak = logits.max(axis=1, keepdims=True)
    log_norm = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    picked = logits[np.arange(batch.size), batch.labels]
    return float(np.mean(log_norm - picked))


def compute_gradient(params: ModelParams, batch: Minibatch) -> GradientVector:
    """Mean-reduced gradient of softmax cross-entropy, laid out weights-then-bias."""
    _check_batch(params, batch)
    probs = _softmax(_logits(params, batch.examples))
    probs[np.arange(batch.size), batch.labels] -= 1.0
    grad_weights = probs.T @ batch.examples / batch.size
    grad_bias = probs.mean(axis=0)
    return GradientVector(values=np.concatenate([grad_weights.ravel(), grad_bias]), dims=params.dims)


def apply_update(params: ModelParams, grad: GradientVector, lr: float) -> ModelParams:
    """params' = params - lr * grad."""
    if not lr > 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if grad.dims != params.dims:
        raise ContractError(f"gradient dims {grad.dims} do not match params dims {params.dims}")
    return ModelParams.from_flat(params.flat() - lr * grad.values, params.dims)


def finite_diff_gradient(params: ModelParams, batch: Minibatch, eps: float = FINITE_DIFF_EPS) -> GradientVector:
    """Central differences of compute_loss, one coordinate at a time."""
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    _check_batch(params, batch)
    base = params.flat()
    estimate = np.empty_like(base)
    for i in range(base.size):
        plus = base.copy()
        minus = base.copy()
        plus[i] += eps
        minus[i] -= eps
        loss_plus = compute_loss(ModelParams.from_flat(plus, params.dims), batch)
        loss_minus = compute_loss(ModelParams.from_flat(minus, params.dims), batch)
        estimate[i] = (loss_plus - loss_minus) / (2.0 * eps)
    return GradientVector(values=estimate, dims=params.dims)


def predict(params: ModelParams, examples: np.ndarray) -> np.ndarray:
    return np.argmax(_logits(params, np.asarray(examples, dtype=np.float64)), axis=1)


def accuracy(params: ModelParams, batch: Minibatch) -> float:
    _check_batch(params, batch)
    return float(np.mean(predict(params, batch.examples) == batch.labels))
