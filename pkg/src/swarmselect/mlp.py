"""One-hidden-layer perceptron trained by full-batch backpropagation with momentum.

Hidden units are logistic, the output layer is a softmax and the loss is the
mean cross-entropy. Inputs are expected to be standardized by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dataset import N_CLASSES, ClassLabel, Dataset

__all__ = [
    "NetworkParams",
    "TrainConfig",
    "TrainingError",
    "init",
    "forward",
    "forward_batch",
    "compute_gradients",
    "loss",
    "train",
    "predict",
    "predict_batch",
    "dump",
]


class TrainingError(RuntimeError):
    """Training diverged; ``epoch`` is where the loss became non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class NetworkParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        hidden, _ = self.W1.shape
        if self.b1.shape != (hidden,) or self.W2.shape[1] != hidden or self.b2.shape != (self.W2.shape[0],):
            raise ValueError("inconsistent parameter shapes")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_units(self) -> int:
        return self.W1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.W1, self.b1, self.W2, self.b2

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True)
class TrainConfig:
    hidden_units: int = 20
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.hidden_units <= 60:
            raise ValueError(f"hidden_units must lie in [2, 60], got {self.hidden_units}")
        # 0 is accepted so that a frozen network can be checked
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")


def init(input_dim: int, hidden_units: int, output_dim: int = N_CLASSES, seed: int = 0) -> NetworkParams:
    """Uniform weights in +-1/sqrt(fan_in), zero biases."""
    if min(input_dim, hidden_units, output_dim) < 1:
        raise ValueError("all layer sizes must be at least 1")
    rng = np.random.default_rng(seed)
    a1 = 1.0 / np.sqrt(input_dim)
    a2 = 1.0 / np.sqrt(hidden_units)
    W1 = rng.uniform(-a1, a1, size=(hidden_units, input_dim))
    W2 = rng.uniform(-a2, a2, size=(output_dim, hidden_units))
    return NetworkParams(W1, np.zeros(hidden_units), W2, np.zeros(output_dim))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(params: NetworkParams, X: np.ndarray) -> None:
    if X.shape[-1] != params.input_dim:
        raise ValueError(f"input has {X.shape[-1]} features, network expects {params.input_dim}")


def forward_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    _check_input(params, X)
    hidden = _sigmoid(X @ params.W1.T + params.b1)
    return _softmax(hidden @ params.W2.T + params.b2)


def forward(params: NetworkParams, x) -> np.ndarray:
    """Class probabilities for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward expects a single input vector")
    return forward_batch(params, x[None, :])[0]


def _one_hot(y: np.ndarray, n: int) -> np.ndarray:
    T = np.zeros((y.size, n))
    T[np.arange(y.size), y] = 1.0
    return T


def loss(params: NetworkParams, X: np.ndarray, T: np.ndarray) -> float:
    """Mean cross-entropy against one-hot (or soft) targets ``T``."""
    P = forward_batch(params, X)
    return float(-np.mean(np.sum(T * np.log(np.clip(P, 1e-300, None)), axis=1)))


def compute_gradients(params: NetworkParams, X: np.ndarray, T: np.ndarray) -> NetworkParams:
    """Analytic gradients of the mean cross-entropy, packed like the parameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    _check_input(params, X)
    if T.shape != (X.shape[0], params.output_dim):
        raise ValueError("targets must be one row per sample, one column per class")
    n = X.shape[0]
    H = _sigmoid(X @ params.W1.T + params.b1)
    P = _softmax(H @ params.W2.T + params.b2)
    dZ2 = (P - T) / n
    dH = dZ2 @ params.W2
    dZ1 = dH * H * (1.0 - H)
    return NetworkParams(dZ1.T @ X, dZ1.sum(axis=0), dZ2.T @ H, dZ2.sum(axis=0))


def train(
    train_data: Dataset,
    config: TrainConfig,
    output_dim: int = N_CLASSES,
    loss_history: list | None = None,
) -> NetworkParams:
    """Full-batch gradient descent with classical momentum.

    Each epoch applies ``delta = -lr * grad + momentum * delta_prev``. If
    ``loss_history`` is given, the loss before every update is appended to it.
    """
    X = np.asarray(train_data.X, dtype=float)
    y = np.asarray(train_data.y)
    if y.max(initial=0) >= output_dim:
        raise ValueError("labels exceed the output layer size")
    params = init(X.shape[1], config.hidden_units, output_dim, config.seed)
    W1, b1, W2, b2 = (a.copy() for a in params.arrays())
    vW1, vb1, vW2, vb2 = (np.zeros_like(a) for a in (W1, b1, W2, b2))
    T = _one_hot(y, output_dim)
    n = X.shape[0]
    lr, mu = config.learning_rate, config.momentum
    track = loss_history is not None

    for epoch in range(config.epochs):
        H = _sigmoid(X @ W1.T + b1)
        Z = H @ W2.T + b2
        Z -= Z.max(axis=1, keepdims=True)
        E = np.exp(Z)
        S = E.sum(axis=1, keepdims=True)
        if track or epoch % 25 == 0 or epoch == config.epochs - 1:
            value = float(np.mean(np.log(S[:, 0]) - np.sum(T * Z, axis=1)))
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch)
            if track:
                loss_history.append(value)
        dZ2 = (E / S - T) / n
        dZ1 = (dZ2 @ W2) * H * (1.0 - H)
        vW2 *= mu
        vW2 -= lr * (dZ2.T @ H)
        vb2 *= mu
        vb2 -= lr * dZ2.sum(axis=0)
        vW1 *= mu
        vW1 -= lr * (dZ1.T @ X)
        vb1 *= mu
        vb1 -= lr * dZ1.sum(axis=0)
        W2 += vW2
        b2 += vb2
        W1 += vW1
        b1 += vb1

    result = NetworkParams(W1, b1, W2, b2)
    if not result.all_finite():
        raise TrainingError("parameters became non-finite", config.epochs)
    return result


def predict_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(forward_batch(params, X), axis=1)


def predict(params: NetworkParams, x) -> ClassLabel:
    return ClassLabel(int(np.argmax(forward(params, x))))


def dump(params: NetworkParams, names: Iterable[str] = ("W1", "b1", "W2", "b2")) -> str:
    """Debug text dump: one header line with the shape, then row-major values."""
    lines = []
    for name, a in zip(names, params.arrays()):
        lines.append(f"{name} {' '.join(str(s) for s in a.shape)}")
        lines.append(" ".join(repr(float(v)) for v in np.ravel(a)))
    return "\n".join(lines) + "\n"
