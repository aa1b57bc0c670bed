"""Two-stage workflow orchestration: assess extractors, then fine-tune.

``run_assess`` ranks candidate extractors by their evidence score across
label-budget ratios; ``run_sweep`` measures probe and fine-tuning accuracy
cell by cell over (ratio, seed, method), always evaluating on one fixed
held-out test split that is never subsampled. Reports are emitted as
long-format CSV plus JSON with stable column order and atomic writes.

Failed sweep cells are recorded as ``FAIL:<stage>`` and do not stop the
sweep. Every number in a report is reproducible from the configuration and
seeds alone; wall-clock timings are the documented exception and can be
disabled for byte-identical reruns.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import FeatureBundle
from .extractors import extract_all, get_extractor
from .logme import improvement_rate, logme_score, rank_extractors
from .lora import TrainConfig, parse_mode, standardize_features, train_classifier
from .pipeline import WindowedDataset, align_and_stack, concat_windows, subset, window
from .probes import evaluate, fit_predict
from .synthetic import SynthConfig, generate

SWEEP_COLUMNS = ("ratio", "seed", "method", "accuracy", "macro_f1", "train_seconds")
DEFAULT_RATIOS = (0.01, 0.05, 0.10, 0.20, 0.50, 0.80)


@dataclass(frozen=True)
class SweepSpec:
    """What a data-efficiency sweep runs: ratios x seeds x methods."""

    ratios: tuple[float, ...] = DEFAULT_RATIOS
    seeds: tuple[int, ...] = (0,)
    extractor_id: str = "stat"
    probe_kinds: tuple[str, ...] = ("linear",)
    finetune_modes: tuple[str, ...] = ()
    epochs: int = 150
    learning_rate: float = 0.01
    batch_size: int = 32
    hidden: int = 32

    def __post_init__(self):
        if not self.ratios:
            raise ValueError("at least one ratio is required")
        if any(not 0.0 < r <= 1.0 for r in self.ratios):
            raise ValueError(f"ratios must lie in (0, 1], got {self.ratios}")
        if any(b >= a for a, b in zip(self.ratios[1:], self.ratios)):
            raise ValueError("ratios must be strictly increasing")
        if not self.seeds:
            raise ValueError("at least one seed is required")


def synth_windows(
    config: SynthConfig,
    window_len: int = 512,
    stride: int | None = None,
    dst_rate: float = 512.0,
) -> WindowedDataset:
    """Generate, align, and window a synthetic dataset in one step."""
    records = generate(config)
    parts = [
        window(
            align_and_stack(rec, dst_rate, expected_channels=len(config.rates_hz)),
            window_len,
            stride,
            num_classes=config.num_classes,
        )
        for rec in records
    ]
    return concat_windows(parts, num_classes=config.num_classes)


def _safe_improvement(low: float, high: float) -> float | None:
    # Per-sample evidence can be negative at desk scale, where the relative
    # rate is meaningless; report it only when defined.
    try:
        return improvement_rate(low, high)
    except ValueError:
        return None


def run_assess(
    train: WindowedDataset,
    extractor_ids: list[str],
    ratios: tuple[float, ...] = (0.05, 0.10),
    subset_seed: int = 0,
    tol: float = 1e-5,
) -> dict:
    """Score every extractor at every label-budget ratio and rank them.

    For each ratio the training split is subsampled once (same seed for every
    extractor, so bundles stay comparable), features are extracted, and the
    evidence score computed. Adjacent ranks get a relative improvement rate
    where the lower score is positive.
    """
    if not extractor_ids:
        raise ValueError("no extractors to assess")
    extractors = [get_extractor(eid) for eid in extractor_ids]

    scores: dict[str, dict[str, float]] = {ex.id: {} for ex in extractors}
    per_class: dict[str, dict[str, list[dict]]] = {}
    ranking: dict[str, list[list]] = {}
    improvements: dict[str, list[dict]] = {}
    for ratio in ratios:
        key = f"{ratio:g}"
        sub = subset(train, ratio, subset_seed) if ratio < 1.0 else train
        bundles = [extract_all(ex, sub) for ex in extractors]
        per_class[key] = {}
        for bundle in bundles:
            report = logme_score(bundle, tol=tol)
            scores[bundle.extractor_id][key] = report.score
            per_class[key][bundle.extractor_id] = [
                {
                    "alpha": r.alpha,
                    "beta": r.beta,
                    "log_evidence_per_sample": r.log_evidence_per_sample,
                    "iterations": r.iterations,
                    "converged": r.converged,
                }
                for r in report.per_class
            ]
        ranked = rank_extractors(bundles, tol=tol)
        ranking[key] = [[eid, score] for eid, score in ranked]
        improvements[key] = [
            {
                "better": ranked[i][0],
                "worse": ranked[i + 1][0],
                "rate_pct": _safe_improvement(ranked[i + 1][1], ranked[i][1]),
            }
            for i in range(len(ranked) - 1)
        ]

    return {
        "extractors": [ex.id for ex in extractors],
        "ratios": [f"{r:g}" for r in ratios],
        "subset_seed": subset_seed,
        "tol": tol,
        "scores": scores,
        "ranking": ranking,
        "improvement": improvements,
        "per_class": per_class,
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_assess_report(report: dict, csv_path=None, json_path=None) -> str:
    """Render the assessment as a score table (extractors x ratios).

    With more than one extractor, improvement rows compare adjacent ranks per
    ratio; undefined rates (non-positive reference score) render as ``n/a``.
    """
    ratios = report["ratios"]
    lines = ["extractor," + ",".join(f"ratio_{r}" for r in ratios)]
    for eid in report["extractors"]:
        cells = [_fmt(report["scores"][eid][r]) for r in ratios]
        lines.append(",".join([eid] + cells))
    if len(report["extractors"]) > 1:
        pairs = len(report["extractors"]) - 1
        for i in range(pairs):
            cells = []
            for r in ratios:
                entry = report["improvement"][r][i]
                cells.append("n/a" if entry["rate_pct"] is None else _fmt(entry["rate_pct"]))
            lines.append(",".join([f"improvement_rank{i + 1}_vs_rank{i + 2}"] + cells))
    text = "\n".join(lines) + "\n"
    if csv_path is not None:
        _atomic_write_text(csv_path, text)
    if json_path is not None:
        _atomic_write_text(json_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return text


def _probe_params(kind: str, train: FeatureBundle) -> dict:
    if kind == "knn":
        return {"k": min(5, train.n)}
    if kind == "linear":
        return {"lam": 1e-2}
    if kind == "tree":
        return {"max_depth": None}
    if kind == "forest":
        return {"n_trees": 25, "mtry": max(1, round(math.sqrt(train.dim)))}
    raise ValueError(f"unknown probe kind {kind!r}")


def _run_cell(
    method: str,
    ratio: float,
    seed: int,
    train_bundle: FeatureBundle,
    test_bundle: FeatureBundle,
    spec: SweepSpec,
    measure_time: bool,
) -> dict:
    row = {
        "ratio": ratio,
        "seed": seed,
        "method": method,
        "accuracy": None,
        "macro_f1": None,
        "train_seconds": 0.0,
        "error": None,
    }
    started = time.perf_counter()
    try:
        if method.startswith("probe:"):
            kind = method.split(":", 1)[1]
            stage = f"probe:{kind}"
            params = _probe_params(kind, train_bundle)
            predictions = fit_predict(kind, params, train_bundle, test_bundle, seed=seed)
        else:
            stage = method
            mode, rank = parse_mode(method.split(":", 1)[1])
            tr, te = standardize_features(train_bundle, test_bundle)
            config = TrainConfig(
                mode=mode,
                rank=max(rank, 1),
                learning_rate=spec.learning_rate,
                epochs=spec.epochs,
                batch_size=spec.batch_size,
                seed=seed,
            )
            model = train_classifier(tr, config, hidden=spec.hidden)
            predictions = model.predict(te.features)
        stage = "evaluate"
        accuracy, macro_f1 = evaluate(
            predictions, test_bundle.labels, num_classes=test_bundle.num_classes
        )
        row["accuracy"] = accuracy
        row["macro_f1"] = macro_f1
    except Exception:
        row["error"] = f"FAIL:{stage}"
    if measure_time:
        row["train_seconds"] = time.perf_counter() - started
    return row


def run_sweep(
    spec: SweepSpec,
    train: WindowedDataset,
    test: WindowedDataset,
    jobs: int = 1,
    measure_time: bool = True,
) -> list[dict]:
    """Run every (ratio, seed, method) cell against the fixed test split.

    The test split is extracted once and reused unchanged, so results across
    ratios and methods are directly comparable. Cells fail independently;
    a failed cell carries ``FAIL:<stage>`` instead of metrics. Rows come back
    in canonical (ratio, seed, method) order regardless of scheduling. Set
    ``measure_time=False`` for byte-identical reruns.
    """
    extractor = get_extractor(spec.extractor_id)
    test_bundle = extract_all(extractor, test)
    methods = [f"probe:{kind}" for kind in spec.probe_kinds]
    methods += [f"finetune:{mode}" for mode in spec.finetune_modes]
    if not methods:
        raise ValueError("sweep has no methods to run")

    cells = []
    for ratio in spec.ratios:
        for seed in spec.seeds:
            try:
                sub = subset(train, ratio, seed) if ratio < 1.0 else train
                train_bundle = extract_all(extractor, sub)
            except Exception:
                for method in methods:
                    cells.append(
                        {
                            "ratio": ratio,
                            "seed": seed,
                            "method": method,
                            "accuracy": None,
                            "macro_f1": None,
                            "train_seconds": 0.0,
                            "error": "FAIL:subset",
                        }
                    )
                continue
            for method in methods:
                cells.append((method, ratio, seed, train_bundle))

    pending = [c for c in cells if isinstance(c, tuple)]
    done = [c for c in cells if isinstance(c, dict)]

    def execute(cell):
        method, ratio, seed, train_bundle = cell
        return _run_cell(method, ratio, seed, train_bundle, test_bundle, spec, measure_time)

    if jobs > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            done.extend(pool.map(execute, pending))
    else:
        done.extend(execute(cell) for cell in pending)

    return sorted(done, key=lambda row: (row["ratio"], row["seed"], row["method"]))


def report_render(rows: list[dict], csv_path, json_path=None, config: dict | None = None) -> str:
    """Write sweep rows as CSV (and optional JSON) with stable formatting.

    Columns are fixed, floats render with 4 decimals, failed cells render as
    their ``FAIL:<stage>`` marker, and files are written atomically.
    """
    if not rows:
        raise ValueError("no results to render")
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            value = row.get(col)
            if col in ("accuracy", "macro_f1") and row.get("error"):
                cells.append(row["error"])
            else:
                cells.append(_fmt(value))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    _atomic_write_text(csv_path, text)
    if json_path is not None:
        doc = {
            "config": config or {},
            "rows": [
                {
                    key: (round(value, 4) if isinstance(value, float) else value)
                    for key, value in row.items()
                }
                for row in rows
            ],
        }
        _atomic_write_text(json_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return text
