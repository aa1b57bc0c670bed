"""Bridge command line: extract embeddings from windows, verify bundles."""

from __future__ import annotations

import argparse
import sys

from .extract import extract
from .models import MODEL_IDS, POOLINGS, BridgeConfig
from .verify import verify_bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed an FWND dataset into an FBND bundle")
    p.add_argument("--model", required=True, help=f"one of {', '.join(MODEL_IDS)} or a registered id")
    p.add_argument("--pooling", choices=POOLINGS, default="concat")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.add_argument("--in", dest="windows", required=True, metavar="WINDOWS")
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="validate an FBND bundle file")
    p.add_argument("--in", dest="bundle", required=True, metavar="BUNDLE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        report = verify_bundle(args.bundle)
        print(report.summary())
        return 0 if report.ok else 1
    config = BridgeConfig(
        model_id=args.model,
        pooling=args.pooling,
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        bundle = extract(args.windows, config, args.out)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {args.out}: n={bundle.features.shape[0]} D={bundle.features.shape[1]} "
        f"extractor={bundle.extractor_id!r}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
