"""CNN transfer-learning engine for 4-class post-earthquake damage grading."""

from .data import DamageClass
from .errors import (
    ArchiveError,
    ChecksumError,
    DamageNetError,
    DatasetError,
    ShapeError,
    TrainingError,
)
from .model import NetworkSpec, build_vgg16_damage, forward, backward, set_transfer_mode
from .optim import SgdMomentum, cross_entropy, loss_gradient_at_logits
from .tensor import Tensor, matmul
from .train import TrainConfig, evaluate, train, write_history
from .weights_io import import_pretrained, load_archive, save_archive

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "ChecksumError",
    "DamageClass",
    "DamageNetError",
    "DatasetError",
    "NetworkSpec",
    "SgdMomentum",
    "ShapeError",
    "Tensor",
    "TrainConfig",
    "TrainingError",
    "backward",
    "build_vgg16_damage",
    "cross_entropy",
    "evaluate",
    "forward",
    "import_pretrained",
    "load_archive",
    "loss_gradient_at_logits",
    "matmul",
    "save_archive",
    "set_transfer_mode",
    "train",
    "write_history",
]
