"""Categorical cross-entropy and SGD with classic momentum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .tensor import Tensor

# Probabilities are clamped here before the log so a confidently wrong
# prediction yields a large finite loss instead of -inf.
PROB_FLOOR = 1e-12

ROW_SUM_TOLERANCE = 1e-4


@dataclass
class LossReport:
    loss: float
    correct_count: int
    batch_size: int

    @property
    def accuracy(self) -> float:
        return self.correct_count / self.batch_size


def _check_probs_labels(probs: Tensor, labels: Sequence[int]) -> np.ndarray:
    if probs.data.ndim != 2:
        raise ShapeError(f"probabilities must be rank 2 [N,classes], got {probs.shape}")
    n, classes = probs.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ShapeError(f"need {n} labels for {n} probability rows, got {labels.shape}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ShapeError(f"labels must lie in [0, {classes}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    row_sums = probs.data.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > ROW_SUM_TOLERANCE:
        raise ShapeError("probability rows do not sum to 1")
    return labels


def cross_entropy(probs: Tensor, labels: Sequence[int]) -> LossReport:
    """Mean negative log-probability of the true class, plus argmax accuracy.

    Ties in the argmax go to the lowest class index, so accuracy is
    deterministic.
    """
    labels = _check_probs_labels(probs, labels)
    n = probs.shape[0]
    picked = probs.data[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))
    predictions = np.argmax(probs.data, axis=1)
    correct = int(np.sum(predictions == labels))
    return LossReport(loss=loss, correct_count=correct, batch_size=n)


def loss_gradient_at_logits(probs: Tensor, labels: Sequence[int]) -> Tensor:
    """Gradient of the mean cross-entropy w.r.t. the softmax logits.

    The combined derivative (probs - onehot) / N; each row sums to zero.
    """
    labels = _check_probs_labels(probs, labels)
    n = probs.shape[0]
    grad = probs.data.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return Tensor(grad)


class SgdMomentum:
    """Classic (heavy-ball) momentum: v <- mu*v - lr*g; w <- w + v.

    Velocities are zero-initialized per parameter on first use and keep
    the parameter's shape and dtype. With mu=0 the update reduces bitwise
    to plain SGD.
    """

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocities: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, Tensor], grads: dict[str, Tensor]) -> None:
        """Update every parameter that has a gradient, in place.

        Parameters without a gradient entry (frozen tensors) are never
        touched.
        """
        for name, grad in grads.items():
            if name not in params:
                raise ShapeError(f"gradient for unknown parameter {name!r}")
            param = params[name]
            if grad.shape != param.shape:
                raise ShapeError(
                    f"gradient shape {grad.shape} does not match parameter "
                    f"{name!r} shape {param.shape}"
                )
            v = self.velocities.get(name)
            if v is None:
                v = np.zeros_like(param.data)
                self.velocities[name] = v
            v *= self.momentum
            v -= self.learning_rate * grad.data
            param.data += v
