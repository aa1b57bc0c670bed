"""File-based bridge from pre-trained time-series models to FBND bundles."""

from .extract import embed_windows, extract
from .formats import Bundle, WindowedData, read_bundle, read_windows, write_bundle, write_windows
from .models import MODEL_IDS, BridgeConfig, ModelUnavailableError, load_embedder, register_embedder
from .verify import verify_bundle

__version__ = "0.1.0"
