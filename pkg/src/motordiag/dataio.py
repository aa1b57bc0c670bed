"""On-disk interchange: dataset manifests, CSV ingestion, FBND/FWND containers.

Two little-endian binary containers are shared by every stage, including
external feature producers:

FBND (feature bundle)::

    magic "FBND" | version u8=1 | n u64 | D u64 | K u64
    | id_len u64 | extractor_id utf-8 | source_hash 32 bytes
    | features n*D float64 row-major | labels n*u32

FWND (windowed dataset)::

    magic "FWND" | version u8=1 | n u64 | C u64 | L u64 | K u64
    | split_len u64 | split utf-8 | ratio float64 | seed i64
    | samples n*C*L float64 row-major | labels n*u32

File sizes are exactly computable from the header, so any truncation or
trailing garbage is detected on read.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pipeline import Channel, LabelMeta, Lineage, SignalRecord, WindowedDataset

FBND_MAGIC = b"FBND"
FWND_MAGIC = b"FWND"
FORMAT_VERSION = 1
SOURCE_HASH_BYTES = 32


class FormatError(ValueError):
    """A container file violates the on-disk format."""


@dataclass(frozen=True)
class FeatureBundle:
    """An n x D feature matrix with aligned labels and extractor provenance.

    ``source_hash`` is the 256-bit digest of the windowed dataset the features
    were computed from, tying downstream scores back to their inputs.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    extractor_id: str
    source_hash: bytes

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels length must equal the sample count")
        if self.num_classes < 1:
            raise ValueError("num_classes must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        if len(self.source_hash) != SOURCE_HASH_BYTES:
            raise ValueError(f"source_hash must be {SOURCE_HASH_BYTES} bytes")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> "FeatureBundle":
        return FeatureBundle(
            self.features[indices],
            self.labels[indices],
            self.num_classes,
            self.extractor_id,
            self.source_hash,
        )


def bundle_file_size(n: int, dim: int, extractor_id: str) -> int:
    """Exact FBND file size in bytes."""
    return 4 + 1 + 24 + 8 + len(extractor_id.encode("utf-8")) + SOURCE_HASH_BYTES + 8 * n * dim + 4 * n


def write_bundle(bundle: FeatureBundle, path) -> None:
    """Serialize a bundle to the FBND format (refuses non-finite features)."""
    if not np.all(np.isfinite(bundle.features)):
        raise ValueError("refusing to write a bundle with non-finite features")
    id_bytes = bundle.extractor_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FBND_MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        fh.write(struct.pack("<QQQ", bundle.n, bundle.dim, bundle.num_classes))
        fh.write(struct.pack("<Q", len(id_bytes)))
        fh.write(id_bytes)
        fh.write(bundle.source_hash)
        fh.write(bundle.features.astype("<f8").tobytes())
        fh.write(bundle.labels.astype("<u4").tobytes())


def read_bundle(path) -> FeatureBundle:
    """Parse an FBND file, validating magic, version, size, and labels."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 1 + 24 + 8:
        raise FormatError(f"{path}: file too short for an FBND header")
    if raw[:4] != FBND_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {FBND_MAGIC!r}")
    if raw[4] != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]}")
    n, dim, num_classes = struct.unpack_from("<QQQ", raw, 5)
    (id_len,) = struct.unpack_from("<Q", raw, 29)
    offset = 37
    expected = bundle_file_size(n, dim, "x" * id_len)
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} does not match header-implied {expected} bytes")
    extractor_id = raw[offset : offset + id_len].decode("utf-8")
    offset += id_len
    source_hash = raw[offset : offset + SOURCE_HASH_BYTES]
    offset += SOURCE_HASH_BYTES
    features = np.frombuffer(raw, dtype="<f8", count=n * dim, offset=offset).reshape(n, dim)
    offset += 8 * n * dim
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise FormatError(f"{path}: label {int(labels.max())} out of range for K={num_classes}")
    if not np.all(np.isfinite(features)):
        raise FormatError(f"{path}: features contain non-finite values")
    return FeatureBundle(features.copy(), labels, num_classes, extractor_id, source_hash)


def write_windows(dataset: WindowedDataset, path) -> None:
    """Serialize a windowed dataset to the FWND format."""
    n, c, length = dataset.samples.shape
    split_bytes = dataset.lineage.split.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FWND_MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        fh.write(struct.pack("<QQQQ", n, c, length, dataset.num_classes))
        fh.write(struct.pack("<Q", len(split_bytes)))
        fh.write(split_bytes)
        fh.write(struct.pack("<dq", dataset.lineage.ratio, dataset.lineage.seed))
        fh.write(dataset.samples.astype("<f8").tobytes())
        fh.write(dataset.labels.astype("<u4").tobytes())


def read_windows(path) -> WindowedDataset:
    """Parse an FWND file, validating magic, version, size, and labels."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 + 1 + 32 + 8:
        raise FormatError(f"{path}: file too short for an FWND header")
    if raw[:4] != FWND_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {FWND_MAGIC!r}")
    if raw[4] != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]}")
    n, c, length, num_classes = struct.unpack_from("<QQQQ", raw, 5)
    (split_len,) = struct.unpack_from("<Q", raw, 37)
    offset = 45
    expected = offset + split_len + 16 + 8 * n * c * length + 4 * n
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} does not match header-implied {expected} bytes")
    split_name = raw[offset : offset + split_len].decode("utf-8")
    offset += split_len
    ratio, seed = struct.unpack_from("<dq", raw, offset)
    offset += 16
    samples = np.frombuffer(raw, dtype="<f8", count=n * c * length, offset=offset)
    samples = samples.reshape(n, c, length)
    offset += 8 * n * c * length
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise FormatError(f"{path}: label {int(labels.max())} out of range for K={num_classes}")
    return WindowedDataset(samples.copy(), labels, num_classes, Lineage(split_name, ratio, seed))


@dataclass(frozen=True)
class ChannelSpec:
    """Where one channel lives in a source file and its sampling rate."""

    column: str
    rate_hz: float


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    channels: tuple[ChannelSpec, ...]
    label: LabelMeta


@dataclass
class DatasetManifest:
    """Recording inventory plus the mapping from condition metadata to class ids.

    Whether "normal" forms one class or one class per power level is a
    property of the configured class_map, not of the code.
    """

    records: list[ManifestRecord]
    class_map: dict[tuple[float, str, float], int]

    def __post_init__(self):
        self.validate()

    @property
    def num_classes(self) -> int:
        return len(set(self.class_map.values()))

    def validate(self) -> None:
        ids = sorted(set(self.class_map.values()))
        if ids != list(range(len(ids))):
            raise ValueError(f"class ids must be contiguous from 0, got {ids}")
        for rec in self.records:
            self.resolve_class(rec.label)

    def resolve_class(self, label: LabelMeta) -> int:
        key = label.key()
        if key not in self.class_map:
            raise ValueError(f"label {key} not present in the class map")
        return self.class_map[key]

    def to_json(self, path) -> None:
        doc = {
            "records": [
                {
                    "path": rec.path,
                    "channels": [{"column": ch.column, "rate_hz": ch.rate_hz} for ch in rec.channels],
                    "label": {
                        "power_kw": rec.label.power_kw,
                        "fault_kind": rec.label.fault_kind,
                        "fault_ratio": rec.label.fault_ratio_pct,
                    },
                }
                for rec in self.records
            ],
            "class_map": [
                {"power_kw": k[0], "fault_kind": k[1], "fault_ratio": k[2], "class_id": v}
                for k, v in sorted(self.class_map.items(), key=lambda kv: kv[1])
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "DatasetManifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        records = [
            ManifestRecord(
                path=rec["path"],
                channels=tuple(ChannelSpec(ch["column"], float(ch["rate_hz"])) for ch in rec["channels"]),
                label=_label_from_doc(rec["label"]),
            )
            for rec in doc.get("records", [])
        ]
        class_map = {
            (float(e["power_kw"]), str(e["fault_kind"]), float(e["fault_ratio"])): int(e["class_id"])
            for e in doc.get("class_map", [])
        }
        return cls(records, class_map)


def _label_from_doc(doc: dict) -> LabelMeta:
    return LabelMeta(
        power_kw=float(doc["power_kw"]),
        fault_kind=str(doc["fault_kind"]),
        fault_ratio_pct=float(doc["fault_ratio"]),
    )


@dataclass(frozen=True)
class CsvIngestConfig:
    """Column mapping and label metadata for CSV ingestion.

    JSON form: ``{"channels": [{"column": ..., "rate_hz": ...}, ...],
    "label": {"power_kw": ..., "fault_kind": ..., "fault_ratio": ...}}``.
    """

    channels: tuple[ChannelSpec, ...]
    label: LabelMeta

    @classmethod
    def from_dict(cls, doc: dict) -> "CsvIngestConfig":
        channels = tuple(ChannelSpec(ch["column"], float(ch["rate_hz"])) for ch in doc["channels"])
        if not channels:
            raise ValueError("ingestion config names no channels")
        return cls(channels, _label_from_doc(doc["label"]))


def _read_csv_channels(path, specs: tuple[ChannelSpec, ...]) -> list[Channel]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for spec in specs:
            if spec.column not in header:
                raise ValueError(f"{path}: missing column {spec.column!r}")
        values: list[list[float]] = [[] for _ in specs]
        for line_no, row in enumerate(reader, start=2):
            for slot, spec in enumerate(specs):
                cell = row.get(spec.column)
                if cell is None or cell == "":
                    raise ValueError(f"{path}:{line_no}: inconsistent row, no value for {spec.column!r}")
                try:
                    values[slot].append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{line_no}: non-numeric cell {cell!r} in column {spec.column!r}"
                    ) from None
    if not values[0]:
        raise ValueError(f"{path}: no data rows")
    return [Channel(np.asarray(v), spec.rate_hz) for v, spec in zip(values, specs)]


def ingest_csv(
    config: CsvIngestConfig | dict,
    paths: list,
    class_map: dict[tuple[float, str, float], int] | None = None,
) -> list[SignalRecord]:
    """Load one SignalRecord per CSV file with channels in configured order.

    Files may differ in length; each record keeps its own. The class id is
    resolved through ``class_map`` when given, otherwise it defaults to 0.
    """
    if isinstance(config, dict):
        config = CsvIngestConfig.from_dict(config)
    label_id = class_map[config.label.key()] if class_map is not None else 0
    records = []
    for path in paths:
        channels = _read_csv_channels(path, config.channels)
        records.append(SignalRecord(tuple(channels), label_id, config.label))
    return records


def load_records(manifest: DatasetManifest, root=None) -> list[SignalRecord]:
    """Materialize every manifest record (``.npz`` channel stores or CSV)."""
    base = Path(root) if root is not None else Path(".")
    records = []
    for rec in manifest.records:
        path = Path(rec.path)
        if not path.is_absolute():
            path = base / path
        label_id = manifest.resolve_class(rec.label)
        if path.suffix == ".npz":
            with np.load(path) as store:
                channels = tuple(
                    Channel(np.asarray(store[ch.column], dtype=np.float64), ch.rate_hz)
                    for ch in rec.channels
                )
        elif path.suffix == ".csv":
            channels = tuple(_read_csv_channels(path, rec.channels))
        else:
            raise ValueError(f"{path}: unsupported record container {path.suffix!r}")
        records.append(SignalRecord(channels, label_id, rec.label))
    return records
