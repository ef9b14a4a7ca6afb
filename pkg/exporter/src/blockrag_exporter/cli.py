"""Command-line exporter: blocks/queries to engine vector files."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import (
    ExportJob,
    export_block_vectors,
    export_fusion_inputs,
    export_query_vectors,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockrag-export",
        description="Encode document blocks and queries into multi-vector files.",
    )
    parser.add_argument("--model", default="stub:16",
                        help="encoder model id; 'stub:<dim>' needs no ML runtime")
    parser.add_argument("--device", default="cpu", help="device hint for real encoders")
    parser.add_argument("--batch-size", type=int, default=16)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blocks", help="encode a blocks JSON document")
    p.add_argument("--input", required=True, help="blocks JSON from the engine")
    p.add_argument("--output", required=True, help="vector file to write")
    p.add_argument("--costs-out", help="token-cost sidecar JSON")
    p.set_defaults(kind="blocks")

    p = sub.add_parser("queries", help="encode a queries JSON array")
    p.add_argument("--input", required=True, help="[{query_id, text}] JSON")
    p.add_argument("--output", required=True)
    p.add_argument("--costs-out")
    p.set_defaults(kind="queries")

    p = sub.add_parser("fusion-inputs",
                       help="emit raw per-block, per-page, and per-tag embeddings")
    p.add_argument("--input", required=True, help="blocks JSON from the engine")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(kind="fusion-inputs")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "fusion-inputs":
            job = ExportJob(args.model, args.input, "", device=args.device,
                            batch_size=args.batch_size)
            counts = export_fusion_inputs(job, args.out_dir)
            print(f"exported fusion inputs: {counts}")
            return 0
        job = ExportJob(
            args.model, args.input, args.output,
            costs_path=args.costs_out, device=args.device,
            batch_size=args.batch_size,
        )
        runner = export_block_vectors if args.kind == "blocks" else export_query_vectors
        count = runner(job)
        print(f"exported {count} entr{'y' if count == 1 else 'ies'} -> {args.output}")
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
