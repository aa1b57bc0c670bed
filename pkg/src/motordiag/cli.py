"""Command-line interface for the condition-monitoring workflow.

Subcommands mirror the two-stage workflow: prepare data (``synth``,
``ingest``, ``window``), assess extractors (``extract``, ``assess``),
evaluate (``probe``, ``finetune``, ``sweep``), and fit cost/loss scaling
(``scaling``). Exit code is 0 only when every requested cell succeeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, scaling, workflows
from .extractors import extract_all, get_extractor
from .lora import TrainConfig, parse_mode, standardize_features, train_classifier
from .pipeline import align_and_stack, concat_windows, split, subset, window
from .probes import default_grid, evaluate, fit_predict, grid_search
from .synthetic import SynthConfig, generate, save_records
from .workflows import SweepSpec, render_assess_report, report_render, run_assess, run_sweep


def _load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cmd_synth(args) -> int:
    config = SynthConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        config = SynthConfig.from_dict({**_load_json(args.config), "seed": args.seed})
    records = generate(config)
    manifest_path = save_records(records, config, args.out)
    print(f"wrote {len(records)} records and {manifest_path}")
    return 0


def _cmd_ingest(args) -> int:
    config = dataio.CsvIngestConfig.from_dict(_load_json(args.config))
    records = dataio.ingest_csv(config, args.inputs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_records = []
    for i, rec in enumerate(records):
        name = f"record_{i:04d}.npz"
        np.savez(out / name, **{ch.column: c.samples for ch, c in zip(config.channels, rec.channels)})
        manifest_records.append(dataio.ManifestRecord(name, config.channels, rec.meta))
    class_map = {config.label.key(): 0}
    manifest = dataio.DatasetManifest(manifest_records, class_map)
    manifest.to_json(out / "manifest.json")
    print(f"ingested {len(records)} files into {out}")
    return 0


def _cmd_window(args) -> int:
    manifest = dataio.DatasetManifest.from_json(args.manifest)
    records = dataio.load_records(manifest, root=Path(args.manifest).parent)
    parts = [
        window(
            align_and_stack(rec, args.rate, expected_channels=args.channels),
            args.window_len,
            args.stride,
            num_classes=manifest.num_classes,
        )
        for rec in records
    ]
    dataset = concat_windows(parts, num_classes=manifest.num_classes)
    if args.split != "all":
        train, test = split(dataset, (args.train_fraction, 1.0 - args.train_fraction), args.seed)
        dataset = train if args.split == "train" else test
    if args.ratio < 1.0:
        dataset = subset(dataset, args.ratio, args.seed)
    dataio.write_windows(dataset, args.out)
    print(f"wrote {len(dataset)} windows ({dataset.channel_count}x{dataset.window_len}) to {args.out}")
    return 0


def _cmd_extract(args) -> int:
    dataset = dataio.read_windows(args.windows)
    bundle = extract_all(get_extractor(args.extractor), dataset)
    dataio.write_bundle(bundle, args.out)
    print(f"wrote bundle n={bundle.n} D={bundle.dim} extractor={bundle.extractor_id} to {args.out}")
    return 0


def _cmd_assess(args) -> int:
    from .logme import logme_score, rank_extractors

    bundles = [dataio.read_bundle(p) for p in args.bundles]
    if args.normalize:
        bundles = [
            dataio.FeatureBundle(
                (b.features - b.features.mean(axis=0)) / np.where(b.features.std(axis=0) > 0, b.features.std(axis=0), 1.0),
                b.labels,
                b.num_classes,
                b.extractor_id,
                b.source_hash,
            )
            for b in bundles
        ]
    ranked = rank_extractors(bundles, tol=args.tol)
    reports = {b.extractor_id: logme_score(b, tol=args.tol) for b in bundles}
    doc = {
        "ranking": [[eid, score] for eid, score in ranked],
        "improvement": [
            {
                "better": ranked[i][0],
                "worse": ranked[i + 1][0],
                "rate_pct": workflows._safe_improvement(ranked[i + 1][1], ranked[i][1]),
            }
            for i in range(len(ranked) - 1)
        ],
        "per_extractor": {
            eid: {
                "score": rep.score,
                "n": rep.n,
                "dim": rep.dim,
                "num_classes": rep.num_classes,
                "per_class": [
                    {
                        "alpha": r.alpha,
                        "beta": r.beta,
                        "log_evidence_per_sample": r.log_evidence_per_sample,
                        "iterations": r.iterations,
                        "converged": r.converged,
                    }
                    for r in rep.per_class
                ],
            }
            for eid, rep in reports.items()
        },
    }
    workflows._atomic_write_text(args.report, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for eid, score in ranked:
        print(f"{eid}\t{score:.4f}")
    return 0


def _cmd_probe(args) -> int:
    train = dataio.read_bundle(args.train)
    test = dataio.read_bundle(args.test)
    if args.grid == "default":
        fit_part, val_part = _bundle_split(train, 0.8, args.seed)
        grid = default_grid(args.kind, train.dim, n_train=fit_part.n)
        result = grid_search(args.kind, grid, fit_part, val_part, seed=args.seed)
        params = result.params
        predictions = fit_predict(args.kind, params, fit_part, test, seed=args.seed)
    else:
        params = json.loads(args.params) if args.params else _default_params(args.kind, train)
        predictions = fit_predict(args.kind, params, train, test, seed=args.seed)
    accuracy, macro_f1 = evaluate(predictions, test.labels, num_classes=test.num_classes)
    row = {
        "kind": args.kind,
        "hyperparams": params,
        "accuracy": round(accuracy, 4),
        "macro_f1": round(macro_f1, 4),
    }
    if args.report:
        workflows._atomic_write_text(args.report, json.dumps([row], indent=2, sort_keys=True) + "\n")
    print(json.dumps(row, sort_keys=True))
    return 0


def _default_params(kind: str, train) -> dict:
    return workflows._probe_params(kind, train)


def _bundle_split(bundle, fraction: float, seed: int):
    """Stratified bundle split used for grid-search validation."""
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for cls in np.unique(bundle.labels):
        idx = np.flatnonzero(bundle.labels == cls)
        if idx.size < 2:
            raise ValueError(f"class {int(cls)} has {idx.size} samples, cannot hold out validation")
        perm = idx[rng.permutation(idx.size)]
        cut = max(1, int(round(idx.size * fraction)))
        cut = min(cut, idx.size - 1)
        train_idx.append(perm[:cut])
        val_idx.append(perm[cut:])
    return bundle.take(np.concatenate(train_idx)), bundle.take(np.concatenate(val_idx))


def _cmd_finetune(args) -> int:
    train = dataio.read_bundle(args.features)
    test = dataio.read_bundle(args.test)
    mode, rank = parse_mode(args.mode)
    if args.normalize:
        train, test = standardize_features(train, test)
    config = TrainConfig(
        mode=mode,
        rank=max(rank, 1),
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    model = train_classifier(train, config, hidden=args.hidden)
    accuracy, macro_f1 = evaluate(model.predict(test.features), test.labels, test.num_classes)
    doc = {
        "mode": args.mode,
        "hidden": args.hidden,
        "epochs": args.epochs,
        "learning_rate": args.lr,
        "seed": args.seed,
        "backbone_trainable": model.backbone_trainable,
        "head_params": model.head_param_count,
        "loss_history": [round(v, 6) for v in model.loss_history],
        "test_accuracy": round(accuracy, 4),
        "test_macro_f1": round(macro_f1, 4),
    }
    workflows._atomic_write_text(args.report, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"{args.mode}: accuracy={accuracy:.4f} macro_f1={macro_f1:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    synth_config = SynthConfig.from_dict(_load_json(args.synth_config))
    dataset = workflows.synth_windows(synth_config, window_len=args.window_len, stride=args.stride)
    train, test = split(dataset, (args.train_fraction, 1.0 - args.train_fraction), args.seed)
    spec = SweepSpec(
        ratios=tuple(float(r) for r in args.ratios.split(",")),
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        extractor_id=args.extractor,
        probe_kinds=tuple(k for k in args.probes.split(",") if k) if args.probes else (),
        finetune_modes=tuple(m for m in args.finetune.split(",") if m) if args.finetune else (),
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        hidden=args.hidden,
    )
    rows = run_sweep(spec, train, test, jobs=args.jobs, measure_time=not args.no_timing)
    out_dir = Path(args.out_dir)
    config_doc = {"synth_config": str(args.synth_config), "spec": spec.__dict__, "split_seed": args.seed}
    report_render(rows, out_dir / "sweep.csv", out_dir / "sweep.json", config=config_doc)
    failed = [row for row in rows if row.get("error")]
    print(f"{len(rows)} cells, {len(failed)} failed; reports in {out_dir}")
    return 1 if failed else 0


def _cmd_scaling(args) -> int:
    if args.scaling_command == "cost":
        cost = scaling.compute_cost(
            args.n,
            args.data_volume,
            batch_size=args.batch,
            steps=args.steps,
        )
        print(f"{cost:.6e}")
        return 0
    points = []
    with open(args.points, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            points.append((float(row["x"]), float(row["L"])))
    fit = scaling.fit_scaling_law(points)
    doc = {
        "l_inf": fit.l_inf,
        "x0": fit.x0,
        "alpha": fit.alpha,
        "rss": fit.rss,
        "points": [list(p) for p in fit.points],
    }
    workflows._atomic_write_text(args.report, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"L(x) = {fit.l_inf:.6g} + ({fit.x0:.6g}/x)^{fit.alpha:.6g}  rss={fit.rss:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motordiag", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="seed for splits and shuffles")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweep cells")
    parser.add_argument("--out-dir", default=".", help="directory for sweep reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="load CSV recordings into a manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("window", help="align, window, split, and subset a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--window-len", type=int, default=512)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--rate", type=float, default=512.0)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_window)

    p = sub.add_parser("extract", help="compute a feature bundle from windows")
    p.add_argument("--windows", required=True)
    p.add_argument("--extractor", required=True, help="raw | stat | randproj:<D>:<seed>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("assess", help="rank feature bundles by evidence score")
    p.add_argument("--bundles", nargs="+", required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--normalize", action="store_true", help="z-score features before scoring")
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_assess)

    p = sub.add_parser("probe", help="train and evaluate one probe classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--kind", choices=("linear", "knn", "tree", "forest"), required=True)
    p.add_argument("--grid", choices=("default", "none"), default="none")
    p.add_argument("--params", default=None, help="JSON hyperparameters when --grid none")
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("finetune", help="train the adapted classifier on a bundle")
    p.add_argument("--features", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mode", required=True, help="lora:<r> | full | frozen")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("sweep", help="data-efficiency sweep over ratios and seeds")
    p.add_argument("--synth-config", required=True)
    p.add_argument("--extractor", default="stat")
    p.add_argument("--ratios", default="0.01,0.05,0.1,0.2,0.5,0.8")
    p.add_argument("--seeds", default="0")
    p.add_argument("--probes", default="linear")
    p.add_argument("--finetune", default="")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--window-len", type=int, default=512)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--no-timing", action="store_true", help="zero timings for reproducible bytes")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("scaling", help="training-cost and loss-curve fits")
    scaling_sub = p.add_subparsers(dest="scaling_command", required=True)
    pc = scaling_sub.add_parser("cost", help="compute 6*N*D")
    pc.add_argument("--n", type=float, required=True)
    pc.add_argument("--data-volume", type=float, default=None)
    pc.add_argument("--batch", type=float, default=None)
    pc.add_argument("--steps", type=float, default=None)
    pf = scaling_sub.add_parser("fit", help="fit the saturating power law")
    pf.add_argument("--points", required=True, help="CSV with columns x,L")
    pf.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_scaling)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface stage errors with a clean message
        print(f"error in '{args.command}': {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
