"""Command line entry point.

Invoked by the evaluation toolkit as a subprocess backend:

    las-adapter --checkpoint model.pt --manifest <path> --out <path>

The toolkit appends --manifest/--out to a configured command prefix, so every
other flag belongs in the prefix.
"""

from __future__ import annotations

import argparse
import sys

from lasadapter.errors import AdapterError
from lasadapter.serve import FEATURE_SOURCES, AdapterConfig, serve_batch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="las-adapter",
        description="Decode a backend manifest with an attention encoder-decoder recognizer.",
    )
    parser.add_argument("--manifest", required=True, help="manifest.jsonl to decode")
    parser.add_argument("--out", required=True, help="where to write hyps.tsv")
    parser.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    parser.add_argument("--device", default="cpu", help="torch device hint (default cpu)")
    parser.add_argument(
        "--features",
        choices=FEATURE_SOURCES,
        default="toolkit",
        help="read precomputed containers or featurize audio internally",
    )
    parser.add_argument(
        "--beam",
        type=int,
        default=1,
        metavar="N",
        help="beam width; 1 means greedy (default)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = AdapterConfig(
            checkpoint=args.checkpoint,
            features=args.features,
            device=args.device,
            beam=args.beam,
        )
        count = serve_batch(args.manifest, args.out, cfg)
    except (AdapterError, OSError) as exc:
        print(f"las-adapter: error: {exc}", file=sys.stderr)
        return 1
    print(f"las-adapter: wrote {count} hypothesis line(s)", file=sys.stderr)
    return 0


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
