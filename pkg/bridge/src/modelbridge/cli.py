"""Bridge command line: serve a model or export its vocabulary."""
from __future__ import annotations

import argparse
import sys

from .server import BridgeConfig, export_vocab, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Serve per-step model logits over the NDJSON protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="answer hello and logits requests")
    p.add_argument("--model", required=True,
                   help="transformers model id/path, or stub:N / stub:VOCABFILE")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--listen", help="host:port (port 0 picks a free port)")
    group.add_argument("--stdio", action="store_true")
    p.add_argument("--max-context", type=int, default=2048)
    p.add_argument("--fp16", action="store_true",
                   help="fp16 weights; logits still leave as fp32")

    p = sub.add_parser("export-vocab", help="write the model's token list")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fp16", action="store_true")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        config = BridgeConfig(
            model=args.model,
            listen=args.listen,
            stdio=args.stdio,
            max_context=args.max_context,
            fp16=args.fp16,
        )
        serve(config)
        return 0
    if args.command == "export-vocab":
        size = export_vocab(args.model, args.out, fp16=args.fp16)
        print(f"{size}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
