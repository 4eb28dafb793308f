"""Command-line entry point: embed an image directory into a .cemb file."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .extract import BACKBONES, ExtractorConfig, ExtractorError, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplens-extract",
        description="Embed raw images with a visual encoder and write the "
                    "caplens .cemb embedding container.",
    )
    parser.add_argument("--backbone", required=True, choices=BACKBONES)
    parser.add_argument("--images", required=True, help="image root directory")
    parser.add_argument("--ids", required=True,
                        help="CSV mapping: image_id,relative_path")
    parser.add_argument("--seed", type=int,
                        help="required for --backbone none")
    parser.add_argument("--weights",
                        help="checkpoint path or model directory for "
                             "moco/imagenet/clip")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = ExtractorConfig(
            backbone=args.backbone,
            image_dir=Path(args.images),
            id_mapping=Path(args.ids),
            seed=args.seed,
            batch_size=args.batch_size,
            weights=args.weights,
        )
        result = extract(config, args.out)
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {result.n_written} records "
          f"(dim {result.dim}), {result.n_skipped} skipped")
    return 0


if __name__ == "__main__":
    sys.exit(main())
