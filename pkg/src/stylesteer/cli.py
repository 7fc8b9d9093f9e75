"""Command-line entry points.

Subcommands: train-prior, generate, sweep, evaluate, report. The
STYLESTEER_LOG environment variable sets the log level.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from .decoding import SteeringConfig, decode
from .metrics import build_lexicon, lexicon_from_prior
from .prior import (
    DEFAULT_K,
    DEFAULT_TOP_K,
    MixtureWeights,
    SmoothingConfig,
    build_prior,
    load_prior,
    save_prior,
)
from .providers import LogitProvider, ReferenceBaseLM, UniformProvider
from .sweep import (
    SweepConfig,
    SweepError,
    evaluate_external,
    reservoir_sample_lines,
    run_sweep,
)
from .tokenizer import (
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_external_vocab,
    save_vocab_file,
    tokenize,
)

log = logging.getLogger("stylesteer")


def _setup_logging() -> None:
    level = os.environ.get("STYLESTEER_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_weights(text: str) -> MixtureWeights:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("weights must be three comma-separated values")
    return MixtureWeights(*parts)


def _load_vocab_for(prior_path: str, vocab_arg: str | None) -> Vocabulary:
    path = vocab_arg or prior_path + ".vocab"
    if not os.path.exists(path):
        raise SystemExit(
            f"no vocabulary found at {path}; pass --vocab with the vocab file"
        )
    return load_external_vocab(path)


def _make_provider(spec: str, vocab: Vocabulary) -> LogitProvider:
    if spec == "uniform":
        return UniformProvider(vocab)
    if spec.startswith("ref:"):
        with open(spec[4:], encoding="utf-8") as fh:
            corpus = tokenize(fh.read(), vocab, source=spec[4:])
        return ReferenceBaseLM(corpus)
    if spec.startswith("remote:"):
        from .wire import RemoteProvider

        return RemoteProvider(spec[len("remote:"):], vocab=vocab)
    raise SystemExit(f"unknown provider spec {spec!r}; use ref:PATH or remote:ADDR")


def cmd_train_prior(args) -> int:
    with open(args.corpus, encoding="utf-8") as fh:
        text = fh.read()
    if args.sample is not None:
        text = reservoir_sample_lines(text, args.sample, args.seed)
    if args.vocab:
        vocab = load_external_vocab(args.vocab)
    else:
        vocab = build_vocabulary(text, max_vocab=args.max_vocab)
    corpus = tokenize(text, vocab, source=args.corpus)
    smoothing = SmoothingConfig(vocab_size=vocab.size, k=args.k, top_k=args.topk)
    prior = build_prior(corpus, smoothing, args.w)
    save_prior(prior, args.out)
    if not args.vocab:
        save_vocab_file(vocab, args.out + ".vocab")
    log.info(
        "prior over V=%d tokens from %d corpus tokens -> %s",
        vocab.size,
        corpus.token_count,
        args.out,
    )
    print(args.out)
    return 0


def cmd_generate(args) -> int:
    vocab = _load_vocab_for(args.prior, args.vocab)
    prior = load_prior(args.prior, vocab=vocab)
    provider = _make_provider(args.provider, vocab)
    mode = "top-p" if args.mode == "topp" else args.mode
    config = SteeringConfig(
        lam=args.lam,
        mode=mode,
        top_p=args.p,
        temperature=args.temp,
        max_new_tokens=args.max_tokens,
        seed=args.seed,
    )
    prompt_ids = tokenize(args.prompt, vocab).ids
    if not prompt_ids:
        raise SystemExit("prompt tokenizes to nothing")
    record = decode(provider, prior, prompt_ids, config)
    print(detokenize(record.token_ids, vocab))
    return 0


def cmd_sweep(args) -> int:
    config = SweepConfig.from_json(args.config)
    if args.out:
        config = dataclasses.replace(config, out_dir=args.out)
    cells_dir = os.path.join(config.out_dir, "cells")
    if os.path.isdir(cells_dir) and os.listdir(cells_dir) and not args.resume:
        raise SystemExit(
            f"{cells_dir} already holds completed cells; pass --resume to continue"
        )
    done = {"n": 0}

    def on_cell(row: dict) -> None:
        done["n"] += 1
        log.info("cell %s [%s] (%d done)", row["cell_id"], row["status"], done["n"])

    try:
        report = run_sweep(config, on_cell=on_cell)
    except SweepError as exc:
        raise SystemExit(f"sweep failed: {exc}")
    failed = sum(1 for r in report.rows if r["status"] != "ok")
    print(f"{len(report.rows)} cells, {failed} failed -> {config.out_dir}")
    return 0 if failed == 0 else 1


def cmd_evaluate(args) -> int:
    vocab = _load_vocab_for(args.prior, args.vocab)
    prior = load_prior(args.prior, vocab=vocab)
    provider = _make_provider(args.provider, vocab)
    if args.corpus:
        with open(args.corpus, encoding="utf-8") as fh:
            lexicon = build_lexicon(tokenize(fh.read(), vocab))
    else:
        lexicon = lexicon_from_prior(prior)
    report = evaluate_external(
        args.text, prior, lexicon, provider, vocab, prompt=args.prompt
    )
    json.dump(report.as_dict(), sys.stdout, indent=2)
    print()
    return 0


def cmd_report(args) -> int:
    from .sweep import assemble_report
    from .reports import emit_reports

    cells_dir = os.path.join(args.indir, "cells")
    if not os.path.isdir(cells_dir):
        raise SystemExit(f"no cells directory under {args.indir}")
    rows = []
    for name in sorted(os.listdir(cells_dir)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(cells_dir, name), encoding="utf-8") as fh:
            rows.append(json.load(fh))
    if not rows:
        raise SystemExit("no completed cells found")
    corpora = tuple(
        sorted({r["corpus"] for r in rows})
    )
    grid = tuple(sorted({r["lambda"] for r in rows}))
    prompts = tuple("" for _ in range(max(r["prompt_id"] for r in rows) + 1))
    config = SweepConfig(
        corpora=tuple((c, "") for c in corpora),
        out_dir=args.indir,
        lambda_grid=grid,
        prompts=prompts,
    )
    rows.sort(key=lambda r: (r["corpus"], r["lambda"], r["prompt_id"]))
    report = assemble_report(config, rows, meta={"config_hash": None})
    emit_reports(report, args.indir)
    print(f"reports rebuilt from {len(rows)} cells -> {args.indir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylesteer",
        description="Style-steer a frozen language model with n-gram logit priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-prior", help="build and save a style prior")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=float, default=DEFAULT_K)
    p.add_argument("--topk", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--w", type=_parse_weights, default=MixtureWeights())
    p.add_argument("--sample", type=int, default=None, help="reservoir-sample N lines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", default=None, help="external vocab file to share")
    p.add_argument("--max-vocab", type=int, default=65536)
    p.set_defaults(func=cmd_train_prior)

    p = sub.add_parser("generate", help="steered generation from a prompt")
    p.add_argument("--prior", required=True)
    p.add_argument("--provider", required=True, help="ref:PATH | remote:ADDR | uniform")
    p.add_argument("--prompt", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--mode", choices=("greedy", "topp"), default="greedy")
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", help="run a lambda x prompt x corpus sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config output dir")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="score an external text file")
    p.add_argument("--text", required=True)
    p.add_argument("--prior", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--vocab", default=None)
    p.add_argument(
        "--corpus",
        default=None,
        help="style corpus for exact overlap rates; omitted, the lexicon is "
        "approximated from the prior's stored tables",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="rebuild reports from persisted cells")
    p.add_argument("--in", dest="indir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
