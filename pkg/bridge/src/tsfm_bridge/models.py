"""Embedding backends: pre-trained time-series models behind one interface.

An embedder consumes batches of univariate windows of length 512 and returns
fixed-width embeddings. Two real backends are wired in (MOMENT in three
checkpoint sizes, Mantis); both need optional dependencies plus downloaded
weights, so their loaders fail with actionable messages when unavailable.
``register_embedder`` accepts additional backends, which is also how tests
supply deterministic stand-ins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

WINDOW_LEN = 512

MOMENT_CHECKPOINTS = {
    "moment-small": "AutonLab/MOMENT-1-small",
    "moment-base": "AutonLab/MOMENT-1-base",
    "moment-large": "AutonLab/MOMENT-1-large",
}
MANTIS_CHECKPOINT = "paris-noah/Mantis-8M"
MODEL_IDS = (*MOMENT_CHECKPOINTS, "mantis")

POOLINGS = ("concat", "mean")


class ModelUnavailableError(RuntimeError):
    """The requested backend or its weights cannot be loaded here."""


class Embedder(Protocol):
    embedding_dim: int

    def embed(self, windows: np.ndarray) -> np.ndarray:
        """Map (B, 512) univariate windows to (B, embedding_dim) features."""


@dataclass(frozen=True)
class BridgeConfig:
    """Which model to run and how to combine per-channel embeddings.

    ``concat`` pooling yields D = embedding_dim * C; ``mean`` averages the
    channel embeddings so D = embedding_dim.
    """

    model_id: str = "mantis"
    pooling: str = "concat"
    batch_size: int = 64
    device: str = "cpu"

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    @property
    def extractor_id(self) -> str:
        return f"{self.model_id}+{self.pooling}"


class _MomentEmbedder:
    def __init__(self, checkpoint: str, device: str):
        try:
            import torch
            from momentfm import MOMENTPipeline
        except ImportError as exc:
            raise ModelUnavailableError(
                f"MOMENT backend needs the 'momentfm' and 'torch' packages "
                f"(pip install momentfm torch): {exc}"
            ) from exc
        try:
            model = MOMENTPipeline.from_pretrained(
                checkpoint, model_kwargs={"task_name": "embedding"}
            )
        except Exception as exc:
            raise ModelUnavailableError(
                f"could not load {checkpoint!r}; download it first, e.g. "
                f"huggingface-cli download {checkpoint}: {exc}"
            ) from exc
        model.init()
        model.eval()
        self._torch = torch
        self._model = model.to(device)
        self._device = device
        self.embedding_dim = int(model.config.d_model)

    def embed(self, windows: np.ndarray) -> np.ndarray:
        batch = self._torch.tensor(windows[:, None, :], dtype=self._torch.float32)
        with self._torch.no_grad():
            output = self._model(x_enc=batch.to(self._device))
        return output.embeddings.cpu().numpy().astype(np.float64)


class _MantisEmbedder:
    def __init__(self, device: str):
        try:
            from mantis.architecture import Mantis8M
            from mantis.trainer import MantisTrainer
        except ImportError as exc:
            raise ModelUnavailableError(
                f"Mantis backend needs the 'mantis-tsfm' and 'torch' packages "
                f"(pip install mantis-tsfm): {exc}"
            ) from exc
        try:
            network = Mantis8M(device=device).from_pretrained(MANTIS_CHECKPOINT)
        except Exception as exc:
            raise ModelUnavailableError(
                f"could not load {MANTIS_CHECKPOINT!r}; download it first, e.g. "
                f"huggingface-cli download {MANTIS_CHECKPOINT}: {exc}"
            ) from exc
        self._trainer = MantisTrainer(device=device, network=network)
        self.embedding_dim = int(getattr(network, "hidden_dim", 256))

    def embed(self, windows: np.ndarray) -> np.ndarray:
        features = self._trainer.transform(windows[:, None, :].astype(np.float32))
        return np.asarray(features, dtype=np.float64)


_FACTORIES: dict[str, Callable[[BridgeConfig], Embedder]] = {}


def register_embedder(model_id: str, factory: Callable[[BridgeConfig], Embedder]) -> None:
    """Expose an additional backend under ``model_id``."""
    _FACTORIES[model_id] = factory


def load_embedder(config: BridgeConfig) -> Embedder:
    if config.model_id in _FACTORIES:
        return _FACTORIES[config.model_id](config)
    if config.model_id in MOMENT_CHECKPOINTS:
        return _MomentEmbedder(MOMENT_CHECKPOINTS[config.model_id], config.device)
    if config.model_id == "mantis":
        return _MantisEmbedder(config.device)
    known = ", ".join((*MODEL_IDS, *_FACTORIES))
    raise ModelUnavailableError(f"unknown model {config.model_id!r}; known: {known}")
