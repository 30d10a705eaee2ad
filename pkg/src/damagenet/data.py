"""Directory-per-class damage image ingestion and batching.

Dataset layout: ``<root>/{no_damage,minor_damage,major_damage,collapse}/``
holding ``.jpg``/``.jpeg``/``.png`` files. Images are decoded to RGB,
bilinearly resized to a square, laid out channel-major, and normalized by
per-channel mean subtraction on the 0-255 scale. The means are the ones
the pretrained convolutional features were produced with, so imported
features see the input distribution they expect; there is no variance
scaling and no augmentation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DatasetError
from .tensor import Tensor

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png"}

# RGB means on the 0-255 scale, matching the pretrained feature extractor.
CHANNEL_MEANS = (123.68, 116.779, 103.939)


class DamageClass(IntEnum):
    """The four damage categories, with fixed indices and directory names."""

    NO_DAMAGE = 0
    MINOR_DAMAGE = 1
    MAJOR_DAMAGE = 2
    COLLAPSE = 3

    @property
    def dir_name(self) -> str:
        return self.name.lower()

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self]

    @classmethod
    def from_dir_name(cls, name: str) -> "DamageClass":
        try:
            return cls[name.upper()]
        except KeyError:
            raise DatasetError(f"unknown damage class directory {name!r}") from None


_DESCRIPTIONS = {
    DamageClass.NO_DAMAGE: "No structural or non-structural damage",
    DamageClass.MINOR_DAMAGE: "Non-structural damage only, such as cracks in non-load-bearing walls",
    DamageClass.MAJOR_DAMAGE: "Structural and non-structural damage, but no collapse",
    DamageClass.COLLAPSE: "Structure collapsed",
}

CLASS_NAMES = tuple(c.dir_name for c in DamageClass)


@dataclass
class DatasetIndex:
    root: Path
    entries: list  # [(Path, DamageClass)], sorted by (class, filename)
    split: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def class_counts(self) -> dict:
        counts = {c: 0 for c in DamageClass}
        for _, cls in self.entries:
            counts[cls] += 1
        return counts


@dataclass
class Batch:
    images: Tensor          # [B, 3, size, size] float32
    labels: np.ndarray      # [B] int64 class indices

    def __len__(self) -> int:
        return len(self.labels)


def scan_dataset(root, split: str = "") -> DatasetIndex:
    """Index a dataset root; deterministic ordering by (class, filename)."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a readable directory")
    entries = []
    for cls in DamageClass:
        class_dir = root / cls.dir_name
        if not class_dir.is_dir():
            raise DatasetError(f"missing class directory {cls.dir_name!r} under {root}")
        files = []
        for path in sorted(class_dir.iterdir()):
            if not path.is_file():
                continue
            if path.suffix.lower() in IMAGE_EXTENSIONS:
                files.append(path)
            else:
                log.warning("ignoring non-image file %s", path)
        if not files:
            raise DatasetError(f"class directory {cls.dir_name!r} contains no images")
        entries.extend((path, cls) for path in files)
    return DatasetIndex(root=root, entries=entries, split=split)


def load_image(path, size: int = 224) -> Tensor:
    """Decode one image to a mean-subtracted [3, size, size] float32 tensor."""
    try:
        with Image.open(path) as img:
            if img.width < 1 or img.height < 1:
                raise DatasetError(f"image {path} has a zero dimension")
            rgb = img.convert("RGB").resize((size, size), Image.Resampling.BILINEAR)
            pixels = np.asarray(rgb, dtype=np.float32)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DatasetError(f"cannot decode image {path}: {exc}") from exc
    chw = np.ascontiguousarray(pixels.transpose(2, 0, 1))
    chw -= np.asarray(CHANNEL_MEANS, dtype=np.float32).reshape(3, 1, 1)
    return Tensor(chw)


def shuffled_entries(index: DatasetIndex, seed: Optional[int]) -> list:
    """Seeded uniform shuffle of the index entries (None keeps scan order)."""
    if seed is None:
        return list(index.entries)
    order = np.random.default_rng(seed).permutation(len(index.entries))
    return [index.entries[i] for i in order]


def make_batches(index: DatasetIndex, batch_size: int = 20,
                 shuffle_seed: Optional[int] = None,
                 image_size: int = 224) -> Iterator[Batch]:
    """Yield decoded minibatches covering the dataset exactly once.

    A final short batch is emitted when the entry count is not divisible
    by ``batch_size``.
    """
    if batch_size < 1:
        raise DatasetError(f"batch size must be >= 1, got {batch_size}")
    if len(index) == 0:
        raise DatasetError("dataset index is empty")
    entries = shuffled_entries(index, shuffle_seed)
    for start in range(0, len(entries), batch_size):
        chunk = entries[start:start + batch_size]
        images = np.stack([load_image(path, image_size).data for path, _ in chunk])
        labels = np.asarray([int(cls) for _, cls in chunk], dtype=np.int64)
        yield Batch(images=Tensor(images), labels=labels)
