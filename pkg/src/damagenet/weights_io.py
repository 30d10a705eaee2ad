"""Bit-exact binary archive for network parameters.

File layout (all integers and floats little-endian):

====================  =======================================
magic                 4 bytes, ``VGGW``
version               u32, currently 1
entry count           u32
per entry             name length u16, name bytes (UTF-8),
                      rank u8, rank x u32 extents,
                      product(extents) x f32 values
trailer               u32 CRC32 of every preceding byte
====================  =======================================

Serialization is deterministic: identical entries produce identical
bytes, so archives can be compared byte-for-byte.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import ArchiveError, ChecksumError, ShapeError
from .model import NetworkSpec

MAGIC = b"VGGW"
VERSION = 1


@dataclass
class ArchiveEntry:
    name: str
    shape: tuple
    values: np.ndarray  # float32, shaped

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if any(s < 1 for s in self.shape) or not self.shape:
            raise ShapeError(f"entry {self.name!r} has invalid shape {self.shape}")
        if self.values.size != int(np.prod(self.shape)):
            raise ShapeError(
                f"entry {self.name!r}: {self.values.size} values for shape {self.shape}"
            )
        self.values = self.values.reshape(self.shape)


def entries_from_network(net: NetworkSpec) -> list[ArchiveEntry]:
    """All parameters in layer order, weight before bias."""
    return [ArchiveEntry(name=name, shape=t.shape, values=t.data)
            for name, t, _ in net.parameters()]


def save_archive(source: Union[NetworkSpec, Iterable[ArchiveEntry]], path) -> None:
    """Write an archive; bytes are a pure function of the entries."""
    if isinstance(source, NetworkSpec):
        entries = entries_from_network(source)
    else:
        entries = list(source)
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise ArchiveError("duplicate entry names in archive")

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(entries))
    for entry in entries:
        name_bytes = entry.name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ArchiveError(f"entry name too long: {entry.name!r}")
        if len(entry.shape) > 0xFF:
            raise ArchiveError(f"entry rank too large: {entry.name!r}")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<B", len(entry.shape))
        blob += struct.pack(f"<{len(entry.shape)}I", *entry.shape)
        blob += entry.values.astype("<f4", copy=False).tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_archive(path) -> list[ArchiveEntry]:
    """Parse and checksum-verify an archive.

    Bad magic, version mismatch, checksum failure, and truncation are
    reported as distinct errors.
    """
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ArchiveError(f"truncated archive: {len(data)} bytes is shorter than the header")
    if data[:4] != MAGIC:
        raise ArchiveError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ArchiveError(f"unsupported archive version {version}, expected {VERSION}")
    stored_crc, = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("checksum mismatch: archive bytes are corrupt")

    end = len(data) - 4
    cursor = 12
    entries = []
    for _ in range(count):
        if cursor + 2 > end:
            raise ArchiveError("truncated payload while reading entry name length")
        name_len, = struct.unpack_from("<H", data, cursor)
        cursor += 2
        if cursor + name_len + 1 > end:
            raise ArchiveError("truncated payload while reading entry name")
        name = data[cursor:cursor + name_len].decode("utf-8")
        cursor += name_len
        rank = data[cursor]
        cursor += 1
        if cursor + 4 * rank > end:
            raise ArchiveError(f"truncated payload while reading shape of {name!r}")
        shape = struct.unpack_from(f"<{rank}I", data, cursor)
        cursor += 4 * rank
        size = int(np.prod(shape)) if shape else 0
        if rank == 0 or size == 0:
            raise ArchiveError(f"entry {name!r} declares an empty shape")
        if cursor + 4 * size > end:
            raise ArchiveError(f"truncated payload while reading values of {name!r}")
        values = np.frombuffer(data, dtype="<f4", count=size, offset=cursor).copy()
        cursor += 4 * size
        entries.append(ArchiveEntry(name=name, shape=shape, values=values.reshape(shape)))
    if cursor != end:
        raise ArchiveError(
            f"archive length disagrees with declared entry sizes "
            f"({end - cursor} unexpected trailing bytes)"
        )
    return entries


def _import_entries(net: NetworkSpec, entries: list[ArchiveEntry],
                    expected: dict) -> list[str]:
    by_name = {e.name: e for e in entries}
    missing = [name for name in expected if name not in by_name]
    if missing:
        raise ArchiveError(f"archive is missing tensor {missing[0]!r} "
                           f"({len(missing)} missing in total)")
    unexpected = sorted(set(by_name) - set(expected))
    if unexpected:
        raise ArchiveError(f"archive contains unexpected tensors: {', '.join(unexpected)}")
    report = []
    for name, target in expected.items():
        entry = by_name[name]
        if entry.shape != target.shape:
            raise ArchiveError(
                f"tensor {name!r}: expected shape {target.shape}, found {entry.shape}"
            )
        report.append(f"{name} {list(entry.shape)}")
    # All validated; now overwrite in place so existing references stay live.
    for name, target in expected.items():
        target.data[...] = by_name[name].values.astype(target.dtype, copy=False)
    return report


def import_pretrained(net: NetworkSpec, entries: list[ArchiveEntry]) -> list[str]:
    """Set the 26 convolutional tensors from archive entries.

    The archive must contain exactly the conv weights and biases named
    ``block{b}_conv{c}.weight`` / ``.bias``; extra tensors (a dense head,
    for instance) are rejected. The dense head is never touched. Returns
    one report line per imported tensor.
    """
    expected = {}
    for layer in net.conv_layers():
        expected[f"{layer.name}.weight"] = layer.spec.weights
        expected[f"{layer.name}.bias"] = layer.spec.bias
    return _import_entries(net, entries, expected)


def load_network_weights(net: NetworkSpec, entries: list[ArchiveEntry]) -> list[str]:
    """Set every network parameter (conv blocks and dense head) from entries."""
    expected = {name: t for name, t, _ in net.parameters()}
    return _import_entries(net, entries, expected)
