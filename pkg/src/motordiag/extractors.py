"""Built-in baseline feature extractors.

Three deliberately different-quality extractors stand in for a repository of
candidate models: ``raw`` (flattening, wide but weak), ``randproj`` (a fixed
random projection, narrow and weak), and ``stat`` (per-channel time/frequency
statistics, strong). External extractors participate by writing FBND bundles
directly.
"""

from __future__ import annotations

import numpy as np

from .dataio import FeatureBundle
from .pipeline import WindowedDataset


class FeatureError(ValueError):
    """A transform produced an invalid (non-finite) feature."""


class Extractor:
    """Deterministic map from a C x L sample to a fixed-length feature vector."""

    id: str

    def dim(self, channels: int, length: int) -> int:
        raise NotImplementedError

    def transform(self, sample: np.ndarray) -> np.ndarray:
        return self.transform_batch(np.asarray(sample, dtype=np.float64)[None])[0]

    def transform_batch(self, samples: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class RawFlatten(Extractor):
    """Row-major flattening of the C x L sample, no scaling."""

    id = "raw"

    def dim(self, channels: int, length: int) -> int:
        return channels * length

    def transform_batch(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        n = samples.shape[0]
        return samples.reshape(n, -1).copy()


class StatFeatures(Extractor):
    """Eight summary statistics per channel, concatenated channel-major.

    Per channel: mean, standard deviation, RMS, skewness, excess kurtosis,
    crest factor (peak / RMS), dominant DFT magnitude bin index, and the
    fraction of spectral energy in bins strictly above L/4. Conventions for
    degenerate channels: a constant channel has skewness and kurtosis 0 and
    crest factor 1; an all-zero channel has energy ratio 0.
    """

    id = "stat"
    PER_CHANNEL = 8

    def dim(self, channels: int, length: int) -> int:
        return self.PER_CHANNEL * channels

    def transform_batch(self, samples: np.ndarray) -> np.ndarray:
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 3:
            raise ValueError(f"expected (n, C, L) samples, got shape {x.shape}")
        n, channels, length = x.shape
        if length < 2:
            raise ValueError("statistics need windows of at least 2 samples")

        mean = x.mean(axis=-1)
        centered = x - mean[..., None]
        m2 = np.mean(centered**2, axis=-1)
        std = np.sqrt(m2)
        rms = np.sqrt(np.mean(x**2, axis=-1))
        constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))

        safe_m2 = np.where(constant, 1.0, m2)
        skew = np.where(constant, 0.0, np.mean(centered**3, axis=-1) / safe_m2**1.5)
        kurt = np.where(constant, 0.0, np.mean(centered**4, axis=-1) / safe_m2**2 - 3.0)
        peak = np.abs(x).max(axis=-1)
        crest = np.where(rms > 0.0, peak / np.where(rms > 0.0, rms, 1.0), 1.0)

        power = np.abs(np.fft.rfft(x, axis=-1)) ** 2
        dominant = power.argmax(axis=-1).astype(np.float64)
        cut = length // 4
        high = power[..., cut + 1 :].sum(axis=-1)
        total = power.sum(axis=-1)
        ratio = np.where(total > 0.0, high / np.where(total > 0.0, total, 1.0), 0.0)

        feats = np.stack([mean, std, rms, skew, kurt, crest, dominant, ratio], axis=-1)
        return feats.reshape(n, channels * self.PER_CHANNEL)


class RandomProjection(Extractor):
    """Projection through a fixed random matrix drawn once from the seed.

    Entries of the D x (C*L) matrix are N(0, 1/(C*L)); the matrix is cached
    per input size, so repeated extraction is deterministic.
    """

    def __init__(self, out_dim: int, seed: int):
        if out_dim < 1:
            raise ValueError("projection dimension must be at least 1")
        self.out_dim = out_dim
        self.seed = seed
        self.id = f"randproj:{out_dim}:{seed}"
        self._matrices: dict[int, np.ndarray] = {}

    def dim(self, channels: int, length: int) -> int:
        return self.out_dim

    def _matrix(self, flat_dim: int) -> np.ndarray:
        if flat_dim not in self._matrices:
            rng = np.random.default_rng(self.seed)
            scale = np.sqrt(1.0 / flat_dim)
            self._matrices[flat_dim] = rng.normal(0.0, scale, size=(self.out_dim, flat_dim))
        return self._matrices[flat_dim]

    def transform_batch(self, samples: np.ndarray) -> np.ndarray:
        x = np.asarray(samples, dtype=np.float64)
        n = x.shape[0]
        flat = x.reshape(n, -1)
        return flat @ self._matrix(flat.shape[1]).T


def get_extractor(spec: str) -> Extractor:
    """Resolve an extractor id: ``raw``, ``stat``, or ``randproj:<D>:<seed>``."""
    if spec == "raw":
        return RawFlatten()
    if spec == "stat":
        return StatFeatures()
    if spec.startswith("randproj:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected randproj:<D>:<seed>, got {spec!r}")
        return RandomProjection(int(parts[1]), int(parts[2]))
    raise ValueError(f"unknown extractor {spec!r}")


def extract_all(extractor: Extractor, dataset: WindowedDataset) -> FeatureBundle:
    """Run the extractor over every window and package a feature bundle.

    Labels are copied from the dataset and the bundle records the extractor id
    plus the dataset content hash, so downstream comparisons can verify that
    bundles came from the same data.
    """
    features = extractor.transform_batch(dataset.samples)
    bad = ~np.isfinite(features)
    if bad.any():
        sample_idx = int(np.argwhere(bad)[0][0])
        raise FeatureError(f"extractor {extractor.id!r} produced a non-finite feature at sample {sample_idx}")
    return FeatureBundle(
        features=features,
        labels=dataset.labels.copy(),
        num_classes=dataset.num_classes,
        extractor_id=extractor.id,
        source_hash=dataset.content_hash(),
    )
