"""Experiment orchestration: lambda grids over prompts and corpora.

A sweep cell is one (corpus, lambda, prompt) generation plus its metrics.
Cells are seeded independently from the run seed, persisted incrementally
as JSON under ``<out>/cells/`` and skipped on restart, so an interrupted
sweep resumes to the identical report. Failures stay contained to their
cell.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field, replace

from .decoding import DecodeError, GenerationAborted, SteeringConfig, decode
from .metrics import MetricsError, StyleLexicon, build_lexicon, compute_report
from .prior import (
    DEFAULT_K,
    DEFAULT_TOP_K,
    MixtureWeights,
    SmoothingConfig,
    StylePrior,
    build_prior,
)
from .prompts import DEFAULT_LAMBDA_GRID, DEFAULT_PROMPTS
from .providers import LogitProvider, ProviderError, ReferenceBaseLM, UniformProvider
from .tokenizer import (
    TokenizerError,
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_external_vocab,
    tokenize,
)

log = logging.getLogger("stylesteer.sweep")


class SweepError(ValueError):
    """Fatal sweep configuration problem."""


@dataclass(frozen=True)
class SweepConfig:
    corpora: tuple[tuple[str, str], ...]
    out_dir: str
    provider: str = "uniform"
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    prompts: tuple[str, ...] = DEFAULT_PROMPTS
    decode: SteeringConfig = field(default_factory=SteeringConfig)
    run_seed: int = 0
    vocab_path: str | None = None
    max_vocab: int = 65536
    sample_lines: int | None = None
    prior_k: float = DEFAULT_K
    prior_top_k: int = DEFAULT_TOP_K
    prior_weights: MixtureWeights = field(default_factory=MixtureWeights)
    workers: int = 1

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        corpora = tuple(
            (entry["name"], entry["path"]) for entry in raw.get("corpora", ())
        )
        decode_raw = raw.get("decode", {})
        mode = decode_raw.get("mode", "greedy")
        if mode == "topp":
            mode = "top-p"
        template = SteeringConfig(
            mode=mode,
            top_p=float(decode_raw.get("top_p", 0.9)),
            temperature=float(decode_raw.get("temperature", 1.0)),
            max_new_tokens=int(decode_raw.get("max_new_tokens", 256)),
        )
        prior_raw = raw.get("prior", {})
        weights = prior_raw.get("weights")
        kwargs: dict = {}
        if "lambda_grid" in raw:
            kwargs["lambda_grid"] = tuple(float(x) for x in raw["lambda_grid"])
        if "prompts" in raw:
            kwargs["prompts"] = tuple(raw["prompts"])
        return cls(
            corpora=corpora,
            out_dir=raw.get("out_dir", "."),
            provider=raw.get("provider", "uniform"),
            decode=template,
            run_seed=int(raw.get("seed", 0)),
            vocab_path=raw.get("vocab"),
            max_vocab=int(raw.get("max_vocab", 65536)),
            sample_lines=raw.get("sample"),
            prior_k=float(prior_raw.get("k", DEFAULT_K)),
            prior_top_k=int(prior_raw.get("top_k", DEFAULT_TOP_K)),
            prior_weights=MixtureWeights(*weights) if weights else MixtureWeights(),
            workers=int(raw.get("workers", 1)),
            **kwargs,
        )

    def config_hash(self) -> str:
        payload = {
            "corpora": list(self.corpora),
            "provider": self.provider,
            "lambda_grid": list(self.lambda_grid),
            "prompts": list(self.prompts),
            "decode": {
                "mode": self.decode.mode,
                "top_p": self.decode.top_p,
                "temperature": self.decode.temperature,
                "max_new_tokens": self.decode.max_new_tokens,
            },
            "seed": self.run_seed,
            "vocab": self.vocab_path,
            "max_vocab": self.max_vocab,
            "sample": self.sample_lines,
            "prior": {
                "k": self.prior_k,
                "top_k": self.prior_top_k,
                "weights": list(self.prior_weights.as_tuple()),
            },
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SweepReport:
    rows: list[dict]
    aggregates: dict
    frontier: dict
    meta: dict


def lam_millis(lam: float) -> int:
    return int(round(lam * 1000))


def cell_id(corpus: str, lam: float, prompt_idx: int) -> str:
    return f"{corpus}_l{lam_millis(lam):04d}_p{prompt_idx:03d}"


def cell_seed(run_seed: int, corpus: str, lam: float, prompt_idx: int) -> int:
    """Order-independent per-cell seed from stable cell coordinates."""
    key = f"{run_seed}|{corpus}|{lam_millis(lam)}|{prompt_idx}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def reservoir_sample_lines(text: str, n: int, seed: int) -> str:
    """Seeded single-pass reservoir sample of lines, original order kept."""
    import random

    rng = random.Random(seed)
    reservoir: list[tuple[int, str]] = []
    for i, line in enumerate(text.splitlines()):
        if i < n:
            reservoir.append((i, line))
        else:
            j = rng.randrange(i + 1)
            if j < n:
                reservoir[j] = (i, line)
    reservoir.sort()
    return "\n".join(line for _, line in reservoir)


def pareto_frontier(points) -> list[tuple[float, float, float]]:
    """Non-dominated (lambda, base ppl, style ppl) points, minimizing both
    perplexities; result sorted by base perplexity ascending."""
    pts = [(float(l), float(b), float(s)) for l, b, s in points]
    for _, b, s in pts:
        if not (math.isfinite(b) and math.isfinite(s)):
            raise SweepError("pareto points must be finite")
    pts.sort(key=lambda p: (p[1], p[2], p[0]))
    frontier: list[tuple[float, float, float]] = []
    best_style = float("inf")
    best_base: float | None = None
    for p in pts:
        if p[2] < best_style:
            frontier.append(p)
            best_style = p[2]
            best_base = p[1]
        elif p[2] == best_style and p[1] == best_base:
            frontier.append(p)
    return frontier


class SweepMaterials:
    """Everything a cell needs: vocabulary, priors, lexicons, providers."""

    def __init__(self, config: SweepConfig):
        self.config = config
        texts: dict[str, str] = {}
        for name, path in config.corpora:
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise SweepError(f"corpus {name!r} unreadable: {exc}") from exc
            if config.sample_lines is not None:
                text = reservoir_sample_lines(
                    text,
                    config.sample_lines,
                    cell_seed(config.run_seed, name, 0.0, -1),
                )
            texts[name] = text
        if len(texts) != len(config.corpora):
            raise SweepError("corpus names must be unique")

        base_text = None
        if config.provider.startswith("ref:"):
            base_path = config.provider[4:]
            try:
                with open(base_path, encoding="utf-8") as fh:
                    base_text = fh.read()
            except OSError as exc:
                raise SweepError(f"base corpus unreadable: {exc}") from exc

        if config.vocab_path is not None:
            self.vocab = load_external_vocab(config.vocab_path)
        else:
            pieces = ([base_text] if base_text is not None else []) + [
                texts[name] for name, _ in config.corpora
            ]
            try:
                self.vocab = build_vocabulary(
                    "\n".join(pieces), max_vocab=config.max_vocab
                )
            except TokenizerError as exc:
                raise SweepError(str(exc)) from exc

        self.priors: dict[str, StylePrior] = {}
        self.lexicons: dict[str, StyleLexicon] = {}
        smoothing = SmoothingConfig(
            vocab_size=self.vocab.size, k=config.prior_k, top_k=config.prior_top_k
        )
        for name, _ in config.corpora:
            corpus = tokenize(texts[name], self.vocab, source=name)
            self.priors[name] = build_prior(corpus, smoothing, config.prior_weights)
            self.lexicons[name] = build_lexicon(corpus)

        self._base_text = base_text
        self._local = threading.local()
        self._remote_providers: list = []
        self._shared_provider: LogitProvider | None = None
        if config.provider == "uniform":
            self._shared_provider = UniformProvider(self.vocab)
        elif config.provider.startswith("ref:"):
            corpus = tokenize(base_text, self.vocab, source=config.provider[4:])
            self._shared_provider = ReferenceBaseLM(corpus)
        elif config.provider.startswith("remote:"):
            # Workers connect lazily, but an unreachable or mismatched
            # server must abort before any cell runs.
            self._probe_remote()
        else:
            raise SweepError(f"unknown provider spec {config.provider!r}")

    def _probe_remote(self) -> None:
        from .wire import RemoteProvider, WireError

        address = self.config.provider[len("remote:"):]
        try:
            RemoteProvider(address, vocab=self.vocab).close()
        except WireError as exc:
            raise SweepError(f"remote provider unusable: {exc}") from exc

    def provider(self) -> LogitProvider:
        if self._shared_provider is not None:
            return self._shared_provider
        existing = getattr(self._local, "provider", None)
        if existing is None:
            from .wire import RemoteProvider

            address = self.config.provider[len("remote:"):]
            existing = RemoteProvider(address, vocab=self.vocab)
            self._local.provider = existing
            self._remote_providers.append(existing)
        return existing

    def close(self) -> None:
        for provider in self._remote_providers:
            provider.close()
        self._remote_providers.clear()


def run_cell(
    materials: SweepMaterials,
    corpus: str,
    lam: float,
    prompt_idx: int,
    prompt_override: str | None = None,
) -> dict:
    """Execute one cell; failures are captured in the row, not raised."""
    config = materials.config
    seed = cell_seed(config.run_seed, corpus, lam, prompt_idx)
    prompt_text = (
        prompt_override if prompt_override is not None else config.prompts[prompt_idx]
    )
    row = {
        "cell_id": cell_id(corpus, lam, prompt_idx),
        "corpus": corpus,
        "lambda": lam,
        "prompt_id": prompt_idx,
        "seed": seed,
        "status": "ok",
        "T": None,
        "style_ppl": None,
        "base_ppl": None,
        "mean_jsd_bits": None,
        "unigram_overlap": None,
        "bigram_seen": None,
        "text": None,
        "error": None,
    }
    try:
        prompt_ids = tokenize(prompt_text, materials.vocab).ids
        if not prompt_ids:
            raise DecodeError("prompt tokenizes to nothing")
        steering = replace(config.decode, lam=lam, seed=seed)
        provider = materials.provider()
        record = decode(provider, materials.priors[corpus], prompt_ids, steering)
        report = compute_report(
            record, materials.priors[corpus], materials.lexicons[corpus], provider
        )
        row.update(report.as_dict())
        row["text"] = detokenize(record.token_ids, materials.vocab)
    except (DecodeError, GenerationAborted, ProviderError, MetricsError) as exc:
        row["status"] = "failed"
        row["error"] = str(exc)
        log.warning("cell %s failed: %s", row["cell_id"], exc)
    return row


def _cells_dir(out_dir: str) -> str:
    return os.path.join(out_dir, "cells")


def _persist_row(out_dir: str, row: dict) -> None:
    cells = _cells_dir(out_dir)
    os.makedirs(cells, exist_ok=True)
    final = os.path.join(cells, row["cell_id"] + ".json")
    tmp = final + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(row, fh, sort_keys=True)
    os.replace(tmp, final)


def _load_row(out_dir: str, cid: str) -> dict | None:
    path = os.path.join(_cells_dir(out_dir), cid + ".json")
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def assemble_report(config: SweepConfig, rows: list[dict], meta: dict) -> SweepReport:
    """Aggregates per (corpus, lambda) over ok rows plus the per-corpus frontier."""
    aggregates: dict = {}
    frontier: dict = {}
    for corpus, _ in config.corpora:
        per_lambda: dict = {}
        points = []
        for lam in config.lambda_grid:
            cell_rows = [
                r
                for r in rows
                if r["corpus"] == corpus
                and r["lambda"] == lam
                and r["status"] == "ok"
            ]
            if not cell_rows:
                continue
            agg = _aggregate_rows(cell_rows)
            per_lambda[repr(lam)] = agg
            points.append(
                (lam, agg["base_ppl"]["mean"], agg["style_ppl"]["mean"])
            )
        aggregates[corpus] = per_lambda
        frontier[corpus] = pareto_frontier(points) if points else []
    return SweepReport(rows=rows, aggregates=aggregates, frontier=frontier, meta=meta)


def _aggregate_rows(rows: list[dict]) -> dict:
    from .metrics import summarize

    out: dict = {"n": len(rows)}
    for name in ("style_ppl", "base_ppl", "mean_jsd_bits", "unigram_overlap", "bigram_seen"):
        values = [r[name] for r in rows if r[name] is not None]
        if values:
            out[name] = summarize(values)
    return out


def run_sweep(config: SweepConfig, on_cell=None) -> SweepReport:
    """Run (or resume) the full sweep and emit reports into the output dir.

    ``on_cell(row)`` fires after each cell completes, including cells
    replayed from disk on resume.
    """
    if not config.corpora:
        raise SweepError("no corpora configured")
    if not config.lambda_grid:
        raise SweepError("empty lambda grid")
    if not config.prompts:
        raise SweepError("no prompts configured")
    for lam in config.lambda_grid:
        if not 0.0 <= lam <= 1.0:
            raise SweepError(f"lambda {lam} outside [0, 1]")
    started = time.time()
    materials = SweepMaterials(config)
    os.makedirs(config.out_dir, exist_ok=True)

    cells = [
        (corpus, lam, pi)
        for corpus, _ in config.corpora
        for lam in config.lambda_grid
        for pi in range(len(config.prompts))
    ]

    def one(cell) -> dict:
        corpus, lam, pi = cell
        cached = _load_row(config.out_dir, cell_id(corpus, lam, pi))
        if cached is not None:
            return cached
        row = run_cell(materials, corpus, lam, pi)
        _persist_row(config.out_dir, row)
        return row

    rows: list[dict] = []
    try:
        if config.workers > 1:
            with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
                for row in pool.map(one, cells):
                    rows.append(row)
                    if on_cell is not None:
                        on_cell(row)
        else:
            for cell in cells:
                row = one(cell)
                rows.append(row)
                if on_cell is not None:
                    on_cell(row)
    finally:
        materials.close()

    order = {name: i for i, (name, _) in enumerate(config.corpora)}
    rows.sort(key=lambda r: (order[r["corpus"]], r["lambda"], r["prompt_id"]))
    meta = {
        "run_seed": config.run_seed,
        "config_hash": config.config_hash(),
        "started": started,
        "finished": time.time(),
        "vocab_fingerprint": materials.vocab.fingerprint_hex(),
    }
    report = assemble_report(config, rows, meta)

    from .reports import emit_reports

    emit_reports(report, config.out_dir)
    return report


def prompt_prefix_mode(
    config: SweepConfig, style_instruction: str, materials: SweepMaterials | None = None
) -> list[dict]:
    """Unsteered rows with the instruction prepended to every prompt.

    Lambda is forced to 0; instruction tokens count as prompt and are
    therefore excluded from all metrics. Rows are returned, not persisted.
    """
    if materials is None:
        materials = SweepMaterials(config)
    rows = []
    for corpus, _ in config.corpora:
        for pi, prompt in enumerate(config.prompts):
            prefixed = f"{style_instruction} {prompt}" if style_instruction else prompt
            rows.append(run_cell(materials, corpus, 0.0, pi, prompt_override=prefixed))
    return rows


def evaluate_external(
    text_path,
    prior: StylePrior,
    lexicon: StyleLexicon,
    provider: LogitProvider,
    vocab: Vocabulary,
    prompt: str = "",
):
    """Score an externally produced text file with the standard pipeline.

    The text is tokenized under the shared vocabulary and treated as the
    generated sequence; the optional prompt becomes the conditioning prefix
    for base perplexity. No steering happened, so divergence is zero.
    """
    from .decoding import GenerationRecord

    with open(text_path, encoding="utf-8") as fh:
        text = fh.read()
    ids = tokenize(text, vocab, source=str(text_path)).ids
    if not ids:
        raise MetricsError("external text tokenizes to nothing")
    prompt_ids = tokenize(prompt, vocab).ids if prompt else ()
    record = GenerationRecord(
        prompt_ids=tuple(prompt_ids),
        token_ids=ids,
        step_jsd_bits=(0.0,) * len(ids),
        step_base_logprob=(),
        config=None,
        provider=provider.descriptor,
    )
    return compute_report(record, prior, lexicon, provider)
