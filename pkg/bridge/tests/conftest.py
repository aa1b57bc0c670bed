"""Deterministic stand-in backend so the bridge machinery tests run offline."""

import numpy as np
import pytest

from tsfm_bridge.models import WINDOW_LEN, register_embedder


class StubEmbedder:
    """Fixed random linear projection of the window; seeded, inference-only."""

    def __init__(self, dim=6, seed=13):
        rng = np.random.default_rng(seed)
        self.embedding_dim = dim
        self._projection = rng.normal(size=(dim, WINDOW_LEN)) / np.sqrt(WINDOW_LEN)

    def embed(self, windows: np.ndarray) -> np.ndarray:
        return np.asarray(windows, dtype=np.float64) @ self._projection.T


@pytest.fixture(autouse=True, scope="session")
def stub_backend():
    register_embedder("stub-linear", lambda config: StubEmbedder())
    return "stub-linear"


def make_windows_arrays(n=4, channels=2, num_classes=2, seed=5):
    rng = np.random.default_rng(seed)
    samples = rng.normal(size=(n, channels, WINDOW_LEN))
    labels = rng.integers(0, num_classes, size=n)
    labels[:num_classes] = np.arange(num_classes)
    return samples, labels
