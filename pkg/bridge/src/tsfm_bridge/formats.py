"""Independent reader/writer pair for the FWND/FBND wire formats.

The bridge talks to the analysis toolkit only through files, so this module
re-implements both containers from their byte-level definitions rather than
importing the toolkit.

FWND (windowed dataset)::

    magic "FWND" | version u8=1 | n u64 | C u64 | L u64 | K u64
    | split_len u64 | split utf-8 | ratio float64 | seed i64
    | samples n*C*L float64 row-major | labels n*u32

FBND (feature bundle)::

    magic "FBND" | version u8=1 | n u64 | D u64 | K u64
    | id_len u64 | extractor_id utf-8 | source_hash 32 bytes
    | features n*D float64 row-major | labels n*u32

All integers and floats are little-endian. The 32-byte source hash of a
bundle derived from a windowed dataset is the SHA-256 of
``"FWND" | n u64 | C u64 | L u64 | K u64 | samples | labels`` over the same
little-endian encodings, which both sides compute identically.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FWND_MAGIC = b"FWND"
FBND_MAGIC = b"FBND"
VERSION = 1


class WireFormatError(ValueError):
    """A container file violates the wire format."""


@dataclass(frozen=True)
class WindowedData:
    samples: np.ndarray  # (n, C, L) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    split: str
    ratio: float
    seed: int

    def content_hash(self) -> bytes:
        n, channels, length = self.samples.shape
        digest = hashlib.sha256()
        digest.update(struct.pack("<4sQQQQ", FWND_MAGIC, n, channels, length, self.num_classes))
        digest.update(self.samples.astype("<f8").tobytes())
        digest.update(self.labels.astype("<u4").tobytes())
        return digest.digest()


def read_windows(path) -> WindowedData:
    raw = Path(path).read_bytes()
    if len(raw) < 45:
        raise WireFormatError(f"{path}: too short for an FWND header")
    if raw[:4] != FWND_MAGIC:
        raise WireFormatError(f"{path}: bad magic {raw[:4]!r}")
    if raw[4] != VERSION:
        raise WireFormatError(f"{path}: unsupported version {raw[4]}")
    n, channels, length, num_classes = struct.unpack_from("<QQQQ", raw, 5)
    (split_len,) = struct.unpack_from("<Q", raw, 37)
    offset = 45
    expected = offset + split_len + 16 + 8 * n * channels * length + 4 * n
    if len(raw) != expected:
        raise WireFormatError(f"{path}: size {len(raw)} != header-implied {expected}")
    split = raw[offset : offset + split_len].decode("utf-8")
    offset += split_len
    ratio, seed = struct.unpack_from("<dq", raw, offset)
    offset += 16
    samples = np.frombuffer(raw, dtype="<f8", count=n * channels * length, offset=offset)
    samples = samples.reshape(n, channels, length).copy()
    offset += 8 * n * channels * length
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise WireFormatError(f"{path}: label {int(labels.max())} out of range for K={num_classes}")
    return WindowedData(samples, labels, num_classes, split, ratio, seed)


def write_windows(data: WindowedData, path) -> None:
    n, channels, length = data.samples.shape
    split_bytes = data.split.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FWND_MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<QQQQ", n, channels, length, data.num_classes))
        fh.write(struct.pack("<Q", len(split_bytes)))
        fh.write(split_bytes)
        fh.write(struct.pack("<dq", data.ratio, data.seed))
        fh.write(data.samples.astype("<f8").tobytes())
        fh.write(data.labels.astype("<u4").tobytes())


@dataclass(frozen=True)
class Bundle:
    features: np.ndarray  # (n, D) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    extractor_id: str
    source_hash: bytes


def write_bundle(bundle: Bundle, path) -> None:
    n, dim = bundle.features.shape
    if not np.all(np.isfinite(bundle.features)):
        raise ValueError("refusing to write non-finite features")
    if len(bundle.source_hash) != 32:
        raise ValueError("source hash must be 32 bytes")
    id_bytes = bundle.extractor_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FBND_MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<QQQ", n, dim, bundle.num_classes))
        fh.write(struct.pack("<Q", len(id_bytes)))
        fh.write(id_bytes)
        fh.write(bundle.source_hash)
        fh.write(np.ascontiguousarray(bundle.features, dtype="<f8").tobytes())
        fh.write(bundle.labels.astype("<u4").tobytes())


def read_bundle(path) -> Bundle:
    raw = Path(path).read_bytes()
    if len(raw) < 37:
        raise WireFormatError(f"{path}: too short for an FBND header")
    if raw[:4] != FBND_MAGIC:
        raise WireFormatError(f"{path}: bad magic {raw[:4]!r}")
    if raw[4] != VERSION:
        raise WireFormatError(f"{path}: unsupported version {raw[4]}")
    n, dim, num_classes = struct.unpack_from("<QQQ", raw, 5)
    (id_len,) = struct.unpack_from("<Q", raw, 29)
    offset = 37
    expected = offset + id_len + 32 + 8 * n * dim + 4 * n
    if len(raw) != expected:
        raise WireFormatError(f"{path}: size {len(raw)} != header-implied {expected}")
    extractor_id = raw[offset : offset + id_len].decode("utf-8")
    offset += id_len
    source_hash = raw[offset : offset + 32]
    offset += 32
    features = np.frombuffer(raw, dtype="<f8", count=n * dim, offset=offset).reshape(n, dim).copy()
    offset += 8 * n * dim
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise WireFormatError(f"{path}: label {int(labels.max())} out of range for K={num_classes}")
    return Bundle(features, labels, num_classes, extractor_id, source_hash)
