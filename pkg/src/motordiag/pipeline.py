"""Signal preprocessing: resampling, channel alignment, windowing, splits.

Raw multichannel recordings (three phase currents plus one vibration channel
in the motor setting) are resampled to a common rate, stacked into fixed-shape
blocks, cut into fixed-length windows, and partitioned into labeled train/test
sets with optional per-class subsampling for scarce-label experiments.

All operations are pure: records and datasets are immutable after
construction, and every random choice is driven by an explicit seed.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import firwin, upfirdn

FAULT_KINDS = ("normal", "inter-turn", "inter-coil")

# Resampling filter: Kaiser windowed-sinc FIR, 64 taps per polyphase branch.
KAISER_BETA = 8.6
TAPS_PER_PHASE = 64


class ConfigError(ValueError):
    """Data does not match its configuration (wrong channel count, ...)."""


@dataclass(frozen=True)
class LabelMeta:
    """Condition metadata attached to one recording."""

    power_kw: float
    fault_kind: str
    fault_ratio_pct: float

    def __post_init__(self):
        if self.fault_kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.fault_kind!r}, expected one of {FAULT_KINDS}")
        if not 0.0 <= self.fault_ratio_pct <= 100.0:
            raise ValueError(f"fault ratio must be in [0, 100], got {self.fault_ratio_pct}")

    def key(self) -> tuple[float, str, float]:
        return (float(self.power_kw), self.fault_kind, float(self.fault_ratio_pct))


@dataclass(frozen=True)
class Channel:
    """One uniformly sampled signal."""

    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("channel must be a non-empty 1-D sequence")
        if self.rate_hz <= 0:
            raise ValueError(f"channel rate must be positive, got {self.rate_hz}")


@dataclass(frozen=True)
class SignalRecord:
    """One multichannel recording with its class label and metadata."""

    channels: tuple[Channel, ...]
    label: int
    meta: LabelMeta

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValueError("record must have at least one channel")
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")


@dataclass(frozen=True)
class AlignedRecord:
    """A recording whose channels share one rate and one length (C x T)."""

    data: np.ndarray
    rate_hz: float
    label: int
    meta: LabelMeta


@dataclass(frozen=True)
class Lineage:
    """How a dataset was derived: split name, subset ratio, and seed."""

    split: str = "all"
    ratio: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class WindowedDataset:
    """Fixed-length multichannel samples with aligned integer labels.

    ``samples`` has shape (n, C, L); ``labels`` holds class ids in
    [0, num_classes). The lineage records which split/subset produced the
    dataset so downstream results stay attributable.
    """

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    lineage: Lineage = field(default_factory=Lineage)

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        if samples.ndim != 3:
            raise ValueError(f"samples must be (n, C, L), got shape {samples.shape}")
        if labels.shape != (samples.shape[0],):
            raise ValueError("labels must align one-to-one with samples")
        if self.num_classes < 1:
            raise ValueError("num_classes must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]

    @property
    def window_len(self) -> int:
        return self.samples.shape[2]

    def take(self, indices: np.ndarray, lineage: Lineage | None = None) -> "WindowedDataset":
        return WindowedDataset(
            self.samples[indices],
            self.labels[indices],
            self.num_classes,
            lineage if lineage is not None else self.lineage,
        )

    def content_hash(self) -> bytes:
        """256-bit digest of the sample/label stream, independent of lineage."""
        n, c, length = self.samples.shape
        h = hashlib.sha256()
        h.update(struct.pack("<4sQQQQ", b"FWND", n, c, length, self.num_classes))
        h.update(self.samples.astype("<f8").tobytes())
        h.update(self.labels.astype("<u4").tobytes())
        return h.digest()


def fault_ratio(r_stator: float, r_bypass: float) -> float:
    """Fault severity in percent for a winding shorted through a bypass resistor.

    A vanishing bypass resistance is a dead short (100); increasing bypass
    resistance diverts less current and the severity tends to zero.
    """
    if r_stator <= 0:
        raise ValueError(f"stator resistance must be positive, got {r_stator}")
    if r_bypass < 0:
        raise ValueError(f"bypass resistance must be non-negative, got {r_bypass}")
    return r_stator / (r_stator + r_bypass) * 100.0


def _rate_fraction(src_rate: float, dst_rate: float) -> tuple[int, int]:
    frac = Fraction(dst_rate / src_rate).limit_denominator(10_000)
    if frac <= 0:
        raise ValueError(f"invalid rate ratio {dst_rate}/{src_rate}")
    return frac.numerator, frac.denominator


def resample(samples: np.ndarray, src_rate: float, dst_rate: float) -> np.ndarray:
    """Rational-rate polyphase resampling with a Kaiser windowed-sinc FIR.

    The rate ratio is reduced to up/down (2000 -> 512 Hz gives 32/125) and the
    signal is filtered on the upsampled grid with a linear-phase lowpass cut at
    the narrower of the two Nyquist frequencies (Kaiser beta 8.6, 64 taps per
    phase). The input is reflect-padded so the output has exactly
    floor(len * dst/src) samples covering the same time span; samples within
    half the filter span (32 input samples) of either edge carry a reflection
    transient.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D channel")
    if x.size == 0:
        raise ValueError("cannot resample an empty channel")
    if src_rate <= 0 or dst_rate <= 0:
        raise ValueError("sampling rates must be positive")
    if src_rate == dst_rate:
        return x.copy()

    up, down = _rate_fraction(src_rate, dst_rate)
    out_len = (x.size * up) // down
    half_input = TAPS_PER_PHASE // 2
    # Left padding is sized so the first output sample falls on an integer
    # polyphase index: (half_input + pad) must be divisible by down.
    pad = down * math.ceil(2 * half_input / down) - half_input
    numtaps = 2 * half_input * up + 1
    taps = firwin(numtaps, 1.0 / max(up, down), window=("kaiser", KAISER_BETA)) * up
    padded = np.pad(x, pad, mode="reflect") if x.size > 1 else np.full(x.size + 2 * pad, x[0])
    filtered = upfirdn(taps, padded, up=up, down=down)
    start = (half_input + pad) * up // down
    if filtered.size < start + out_len:  # pragma: no cover - padding guarantees coverage
        raise RuntimeError("internal resampler error: output shorter than expected")
    return filtered[start : start + out_len]


def align_and_stack(
    record: SignalRecord, dst_rate: float, expected_channels: int | None = None
) -> AlignedRecord:
    """Resample every channel to ``dst_rate`` and stack them into a C x T block.

    Channels already at the target rate are passed through unchanged; all
    channels are truncated to the shortest common length after resampling.
    """
    if expected_channels is not None and len(record.channels) != expected_channels:
        raise ConfigError(
            f"record has {len(record.channels)} channels, configuration expects {expected_channels}"
        )
    resampled = [resample(ch.samples, ch.rate_hz, dst_rate) for ch in record.channels]
    common = min(r.size for r in resampled)
    if common == 0:
        raise ValueError("record too short for the requested rate")
    data = np.stack([r[:common] for r in resampled])
    return AlignedRecord(data=data, rate_hz=float(dst_rate), label=record.label, meta=record.meta)


def window(
    record: AlignedRecord,
    length: int,
    stride: int | None = None,
    num_classes: int | None = None,
) -> WindowedDataset:
    """Cut an aligned record into fixed-length windows.

    Windows start at 0, stride, 2*stride, ...; a trailing remainder shorter
    than ``length`` is dropped, and a record shorter than ``length`` yields an
    empty dataset. Every window inherits the record label.
    """
    if length <= 0:
        raise ValueError(f"window length must be positive, got {length}")
    stride = length if stride is None else stride
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    c, total = record.data.shape
    count = (total - length) // stride + 1 if total >= length else 0
    samples = np.empty((count, c, length), dtype=np.float64)
    for i in range(count):
        samples[i] = record.data[:, i * stride : i * stride + length]
    labels = np.full(count, record.label, dtype=np.int64)
    k = num_classes if num_classes is not None else record.label + 1
    return WindowedDataset(samples, labels, k)


def concat_windows(
    datasets: list[WindowedDataset], num_classes: int | None = None
) -> WindowedDataset:
    """Concatenate windowed datasets that share (C, L)."""
    if not datasets:
        raise ValueError("nothing to concatenate")
    shapes = {(d.channel_count, d.window_len) for d in datasets}
    if len(shapes) != 1:
        raise ValueError(f"datasets disagree on (C, L): {sorted(shapes)}")
    k = num_classes if num_classes is not None else max(d.num_classes for d in datasets)
    samples = np.concatenate([d.samples for d in datasets])
    labels = np.concatenate([d.labels for d in datasets])
    return WindowedDataset(samples, labels, k)


def _largest_remainder(count: int, fractions: np.ndarray) -> np.ndarray:
    exact = count * fractions
    base = np.floor(exact).astype(np.int64)
    leftovers = count - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:leftovers]] += 1
    return base


def split(
    dataset: WindowedDataset, fractions: tuple[float, ...], seed: int
) -> tuple[WindowedDataset, ...]:
    """Stratified split with largest-remainder rounding per class.

    The partitions are disjoint and exhaustive, per-class counts differ from
    the exact fractional share by less than one sample, and the assignment is
    deterministic under the seed.
    """
    fracs = np.asarray(fractions, dtype=np.float64)
    if fracs.ndim != 1 or fracs.size < 2:
        raise ValueError("need at least two fractions")
    if np.any(fracs <= 0):
        raise ValueError(f"fractions must be positive, got {tuple(fractions)}")
    if abs(fracs.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fracs.sum()!r}")
    nparts = fracs.size

    rng = np.random.default_rng(seed)
    chosen: list[list[np.ndarray]] = [[] for _ in range(nparts)]
    for cls in np.unique(dataset.labels):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size < nparts:
            raise ValueError(
                f"class {int(cls)} has {idx.size} samples, fewer than {nparts} partitions"
            )
        perm = idx[rng.permutation(idx.size)]
        counts = _largest_remainder(idx.size, fracs)
        offset = 0
        for part, m in enumerate(counts):
            chosen[part].append(perm[offset : offset + m])
            offset += m

    names = ("train", "test") if nparts == 2 else tuple(f"part{i}" for i in range(nparts))
    return tuple(
        dataset.take(np.concatenate(parts), lineage=Lineage(names[i], 1.0, seed))
        for i, parts in enumerate(chosen)
    )


def subset(dataset: WindowedDataset, ratio: float, seed: int) -> WindowedDataset:
    """Per-class subsample keeping at least one sample per class.

    Class counts are rounded half-up from ``count * ratio`` and the surviving
    samples are returned in a deterministic permuted order; the lineage
    records (ratio, seed).
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    if len(dataset) == 0:
        raise ValueError("cannot subsample an empty dataset")
    rng = np.random.default_rng(seed)
    picks = []
    for cls in np.unique(dataset.labels):
        idx = np.flatnonzero(dataset.labels == cls)
        m = max(1, int(math.floor(idx.size * ratio + 0.5)))
        perm = idx[rng.permutation(idx.size)]
        picks.append(perm[:m])
    selected = np.concatenate(picks)
    selected = selected[rng.permutation(selected.size)]
    return dataset.take(selected, lineage=Lineage(dataset.lineage.split, ratio, seed))
