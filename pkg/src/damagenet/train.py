"""Epoch/iteration training loop, validation, and history serialization."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from .data import DatasetIndex, make_batches
from .errors import DamageNetError, DatasetError, TrainingError
from .model import NetworkSpec, backward, forward, set_transfer_mode
from .optim import SgdMomentum, cross_entropy, loss_gradient_at_logits

HISTORY_HEADER = "epoch,train_loss,train_accuracy,val_loss,val_accuracy"


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 20
    learning_rate: float = 1e-5
    momentum: float = 0.9
    dropout_rate: float = 0.5
    seed: int = 0
    freeze_conv: bool = True
    image_size: int = 224

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if self.image_size < 32 or self.image_size % 32:
            raise ValueError("image size must be a positive multiple of 32")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "dropout_rate": self.dropout_rate,
            "seed": self.seed,
            "freeze_conv": self.freeze_conv,
            "image_size": self.image_size,
        }


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.train_loss:.6f},{self.train_accuracy:.4f},"
                f"{self.val_loss:.6f},{self.val_accuracy:.4f}")


@dataclass
class EvalMetrics:
    loss: float
    accuracy: float
    sample_count: int


@dataclass
class History:
    config: TrainConfig
    epochs: list = field(default_factory=list)        # [EpochMetrics]
    epoch_seconds: list = field(default_factory=list)


def _derive_seed(*parts: int) -> int:
    """Stable scalar seed from structured parts (platform-independent)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def evaluate(net: NetworkSpec, index: DatasetIndex, batch_size: int = 20,
             image_size: int = 224) -> EvalMetrics:
    """Inference-mode pass over a dataset; sample-weighted mean loss/accuracy."""
    if len(index) == 0:
        raise DatasetError("cannot evaluate on an empty dataset index")
    total_loss = 0.0
    total_correct = 0
    total = 0
    for batch in make_batches(index, batch_size, shuffle_seed=None, image_size=image_size):
        trace = forward(net, batch.images, mode="inference")
        report = cross_entropy(trace.probabilities, batch.labels)
        total_loss += report.loss * report.batch_size
        total_correct += report.correct_count
        total += report.batch_size
    return EvalMetrics(loss=total_loss / total, accuracy=total_correct / total,
                       sample_count=total)


def train(net: NetworkSpec, train_index: DatasetIndex, val_index: DatasetIndex,
          config: TrainConfig,
          on_epoch=None) -> tuple[NetworkSpec, History]:
    """Run the full training protocol and record per-epoch metrics.

    Each epoch shuffles the training entries with an epoch-derived seed,
    iterates minibatches with a training-mode forward, backward, and one
    optimizer step, then runs a full inference pass over the validation
    set. Train metrics are means over the epoch's batches, weighted by
    batch size (the weights evolve during the epoch). Everything is
    deterministic given ``config.seed``.
    """
    set_transfer_mode(net, config.freeze_conv)
    for layer in net.dropout_layers():
        layer.spec.rate = config.dropout_rate
    optimizer = SgdMomentum(config.learning_rate, config.momentum)
    params = net.trainable_parameters()
    history = History(config=config)

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        shuffle_seed = _derive_seed(config.seed, epoch, 0)
        epoch_loss = 0.0
        epoch_correct = 0
        epoch_samples = 0
        iteration = 0
        try:
            for batch in make_batches(train_index, config.batch_size,
                                      shuffle_seed=shuffle_seed,
                                      image_size=config.image_size):
                dropout_seed = _derive_seed(config.seed, epoch, 1 + iteration)
                trace = forward(net, batch.images, mode="training", seed=dropout_seed)
                report = cross_entropy(trace.probabilities, batch.labels)
                grad = loss_gradient_at_logits(trace.probabilities, batch.labels)
                grads = backward(net, trace, grad)
                optimizer.step(params, grads)
                epoch_loss += report.loss * report.batch_size
                epoch_correct += report.correct_count
                epoch_samples += report.batch_size
                iteration += 1
        except DamageNetError as exc:
            raise TrainingError(f"epoch {epoch}, batch {iteration + 1}: {exc}") from exc

        try:
            val = evaluate(net, val_index, config.batch_size, config.image_size)
        except DamageNetError as exc:
            raise TrainingError(f"epoch {epoch}, validation: {exc}") from exc
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=epoch_loss / epoch_samples,
            train_accuracy=epoch_correct / epoch_samples,
            val_loss=val.loss,
            val_accuracy=val.accuracy,
        )
        history.epochs.append(metrics)
        history.epoch_seconds.append(time.perf_counter() - started)
        if on_epoch is not None:
            on_epoch(metrics)
    return net, history


def write_history(history: History, path) -> None:
    """Write the history CSV plus a JSON sidecar with the config snapshot.

    CSV: header then one row per epoch, losses with 6 decimals and
    accuracies with 4, ``\\n`` newlines, UTF-8. The sidecar lands next to
    the CSV with a ``.json`` suffix.
    """
    path = Path(path)
    lines = [HISTORY_HEADER]
    lines.extend(m.csv_row() for m in history.epochs)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    sidecar = {
        "config": history.config.to_dict(),
        "epoch_seconds": [round(s, 3) for s in history.epoch_seconds],
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )
