"""Batched feature extraction from windowed datasets into FBND bundles."""

from __future__ import annotations

import numpy as np

from .formats import Bundle, WindowedData, read_windows, write_bundle
from .models import WINDOW_LEN, BridgeConfig, load_embedder


class ShapeError(ValueError):
    """The dataset does not match the models' fixed input length."""


def embed_windows(data: WindowedData, config: BridgeConfig, embedder=None) -> Bundle:
    """Embed every window channel by channel and pool into one bundle.

    Each channel runs through the model as an independent univariate series;
    ``concat`` pooling stacks the per-channel embeddings, ``mean`` averages
    them. Inference only, so identical inputs give identical bundles.
    """
    n, channels, length = data.samples.shape
    if length != WINDOW_LEN:
        raise ShapeError(f"models expect windows of length {WINDOW_LEN}, got {length}")
    if embedder is None:
        embedder = load_embedder(config)

    dim = embedder.embedding_dim
    per_channel = np.zeros((channels, n, dim))
    for channel in range(channels):
        for start in range(0, n, config.batch_size):
            stop = min(start + config.batch_size, n)
            batch = data.samples[start:stop, channel, :]
            out = np.asarray(embedder.embed(batch), dtype=np.float64)
            if out.shape != (stop - start, dim):
                raise ShapeError(
                    f"embedder returned {out.shape}, expected {(stop - start, dim)}"
                )
            per_channel[channel, start:stop] = out

    if config.pooling == "concat":
        features = np.concatenate([per_channel[c] for c in range(channels)], axis=1)
    else:
        features = per_channel.mean(axis=0)
    return Bundle(
        features=features,
        labels=data.labels.copy(),
        num_classes=data.num_classes,
        extractor_id=config.extractor_id,
        source_hash=data.content_hash(),
    )


def extract(windows_path, config: BridgeConfig, out_path, embedder=None) -> Bundle:
    """Read an FWND file, embed it, and write the FBND bundle."""
    data = read_windows(windows_path)
    bundle = embed_windows(data, config, embedder=embedder)
    write_bundle(bundle, out_path)
    return bundle
