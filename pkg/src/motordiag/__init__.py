"""Data-efficient motor condition monitoring toolkit.

Pipeline stages: generate or ingest multichannel recordings, resample and
window them, extract features, rank extractors by Bayesian evidence, evaluate
with probe classifiers under scarce labels, adapt a frozen feature map with
low-rank factors, and fit compute/data scaling laws.
"""

from .dataio import (
    DatasetManifest,
    FeatureBundle,
    FormatError,
    read_bundle,
    read_windows,
    write_bundle,
    write_windows,
)
from .extractors import extract_all, get_extractor
from .logme import (
    EvidenceResult,
    LogMEReport,
    evidence_fixed_point,
    evidence_grid_max,
    improvement_rate,
    logme_score,
    rank_extractors,
)
from .lora import (
    LoraAdapter,
    TrainConfig,
    lora_forward,
    lora_init,
    lora_merge,
    param_counts,
    train_classifier,
)
from .pipeline import (
    Channel,
    LabelMeta,
    SignalRecord,
    WindowedDataset,
    align_and_stack,
    fault_ratio,
    resample,
    split,
    subset,
    window,
)
from .probes import evaluate, grid_search, knn_fit_predict, linear_probe_fit_predict
from .scaling import ScalingFit, compute_cost, fit_scaling_law, predict_loss
from .synthetic import SynthConfig, generate
from .workflows import SweepSpec, run_assess, run_sweep

__version__ = "0.1.0"
