"""Interpolated 1-3 gram style prior: counting, smoothed queries, persistence.

Counts come from a sliding window over the corpus, left-padded with the
begin-of-text id so every token is predicted once per order. Conditional
probabilities are add-k smoothed:

    P(token | context) = (C(context, token) + k) / (N(context) + k * V)

Each context's table keeps only the top-K entries by probability; the
untruncated totals N are retained so stored entries keep the exact formula.
"""
from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass

from .tokenizer import BOT_ID, TokenizedCorpus, Vocabulary

DEFAULT_K = 1e-3
DEFAULT_TOP_K = 512
STYLE_ORDERS = (1, 2, 3)

_MAGIC = b"NGSP"
_FORMAT_VERSION = 1


class PriorError(ValueError):
    """Invalid prior construction or query."""


class PriorFormatError(PriorError):
    """Prior file is malformed or truncated."""


class PriorVersionError(PriorFormatError):
    """Prior file carries an unsupported format version."""


class PriorFingerprintError(PriorError):
    """Prior file does not match the supplied vocabulary."""


@dataclass(frozen=True)
class SmoothingConfig:
    vocab_size: int
    k: float = DEFAULT_K
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise PriorError("smoothing constant k must be > 0")
        if self.top_k < 1:
            raise PriorError("per-context truncation size must be >= 1")
        if self.vocab_size < 2:
            raise PriorError("vocabulary size must be >= 2")


@dataclass(frozen=True)
class MixtureWeights:
    w1: float = 0.1
    w2: float = 0.3
    w3: float = 0.6

    def __post_init__(self) -> None:
        ws = (self.w1, self.w2, self.w3)
        if any(w < 0 for w in ws):
            raise PriorError("mixture weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise PriorError("at least one mixture weight must be positive")

    def weight(self, order: int) -> float:
        return (self.w1, self.w2, self.w3)[order - 1]

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)


class NgramTable:
    """Per-order count table.

    ``entries`` maps a context (tuple of order-1 ids) to an id-keyed dict of
    (count, log-probability) pairs in rank order: descending probability,
    ties by ascending id. ``totals`` holds the untruncated context totals.
    """

    __slots__ = ("order", "entries", "totals")

    def __init__(
        self,
        order: int,
        entries: dict[tuple[int, ...], dict[int, tuple[int, float]]],
        totals: dict[tuple[int, ...], int],
    ):
        self.order = order
        self.entries = entries
        self.totals = totals

    def context_count(self) -> int:
        return len(self.entries)


def count_ngrams(
    ids, order: int, bot_id: int = BOT_ID
) -> tuple[dict[tuple[int, ...], Counter], dict[tuple[int, ...], int]]:
    """Raw sliding-window counts with begin-of-text padding."""
    seq = (bot_id,) * (order - 1) + tuple(ids)
    counts: dict[tuple[int, ...], Counter] = {}
    for i in range(len(seq) - order + 1):
        ctx = seq[i : i + order - 1]
        tok = seq[i + order - 1]
        bucket = counts.get(ctx)
        if bucket is None:
            bucket = counts[ctx] = Counter()
        bucket[tok] += 1
    totals = {ctx: sum(bucket.values()) for ctx, bucket in counts.items()}
    return counts, totals


def build_table(
    ids, order: int, k: float, top_k: int, vocab_size: int, bot_id: int = BOT_ID
) -> NgramTable:
    """Count, smooth, rank and truncate one order's table."""
    counts, totals = count_ngrams(ids, order, bot_id)
    entries: dict[tuple[int, ...], dict[int, tuple[int, float]]] = {}
    kv = k * vocab_size
    for ctx, bucket in counts.items():
        denom = totals[ctx] + kv
        ranked = sorted(bucket.items(), key=lambda item: (-item[1], item[0]))[:top_k]
        entries[ctx] = {tok: (c, math.log((c + k) / denom)) for tok, c in ranked}
    return NgramTable(order, entries, totals)


def build_tables(
    ids, orders, k: float, top_k: int, vocab_size: int, bot_id: int = BOT_ID
) -> dict[int, NgramTable]:
    return {n: build_table(ids, n, k, top_k, vocab_size, bot_id) for n in orders}


class StylePrior:
    """Immutable interpolated n-gram prior over a fixed vocabulary."""

    __slots__ = ("tables", "weights", "smoothing", "fingerprint")

    def __init__(
        self,
        tables: dict[int, NgramTable],
        weights: MixtureWeights,
        smoothing: SmoothingConfig,
        fingerprint: bytes,
    ):
        if sorted(tables) != list(STYLE_ORDERS):
            raise PriorError("style prior requires exactly orders 1, 2 and 3")
        if len(fingerprint) != 8:
            raise PriorError("vocabulary fingerprint must be 8 bytes")
        self.tables = tables
        self.weights = weights
        self.smoothing = smoothing
        self.fingerprint = fingerprint

    @property
    def vocab_size(self) -> int:
        return self.smoothing.vocab_size

    def prob(self, order: int, context, token: int) -> float:
        """Smoothed conditional probability for one order.

        Stored entries use their exact counts; tokens missing from a known
        context get the zero-count floor; unknown contexts fall back to 1/V.
        """
        if order not in self.tables:
            raise PriorError(f"no table of order {order}")
        ctx = tuple(context)
        if len(ctx) != order - 1:
            raise PriorError(
                f"context length {len(ctx)} does not match order {order}"
            )
        table = self.tables[order]
        k = self.smoothing.k
        v = self.smoothing.vocab_size
        total = table.totals.get(ctx)
        if total is None:
            return 1.0 / v
        entry = table.entries.get(ctx, {}).get(token)
        count = entry[0] if entry is not None else 0
        return (count + k) / (total + k * v)

    def present_orders(self, context) -> list[int]:
        """Orders whose context (last order-1 ids) was seen in the corpus."""
        ctx = tuple(context)[-2:]
        present = []
        for n in STYLE_ORDERS:
            if n - 1 > len(ctx):
                continue
            sub = ctx[len(ctx) - (n - 1) :] if n > 1 else ()
            if self.tables[n].totals.get(sub, 0) > 0:
                present.append(n)
        return present

    def mix_logprob(self, context, token: int) -> float:
        """Log of the weighted probability mixture over present orders.

        Absent orders drop out of both numerator and denominator; with no
        order present the prior falls back to the uniform 1/V.
        """
        ctx = tuple(context)[-2:]
        num = 0.0
        den = 0.0
        for n in self.present_orders(ctx):
            w = self.weights.weight(n)
            if w == 0.0:
                continue
            sub = ctx[len(ctx) - (n - 1) :] if n > 1 else ()
            num += w * self.prob(n, sub, token)
            den += w
        if den == 0.0:
            return -math.log(self.smoothing.vocab_size)
        return math.log(num / den)

    def injection_terms(self, context) -> dict[int, float]:
        """Sparse additive logit deltas for the current context.

        Only tokens stored in some order's truncated table contribute; each
        stored entry adds weight * stored log-probability.
        """
        ctx = tuple(context)[-2:]
        deltas: dict[int, float] = {}
        for n in STYLE_ORDERS:
            if n - 1 > len(ctx):
                continue
            sub = ctx[len(ctx) - (n - 1) :] if n > 1 else ()
            entry = self.tables[n].entries.get(sub)
            if not entry:
                continue
            w = self.weights.weight(n)
            for tok, (_count, logprob) in entry.items():
                deltas[tok] = deltas.get(tok, 0.0) + w * logprob
        return deltas


def build_prior(
    corpus: TokenizedCorpus,
    smoothing: SmoothingConfig | None = None,
    weights: MixtureWeights | None = None,
) -> StylePrior:
    """Build the interpolated 1-3 gram prior from a tokenized corpus."""
    if corpus.token_count < 3:
        raise PriorError("corpus too small")
    if smoothing is None:
        smoothing = SmoothingConfig(vocab_size=corpus.vocab.size)
    elif smoothing.vocab_size != corpus.vocab.size:
        raise PriorError(
            f"smoothing config V={smoothing.vocab_size} does not match "
            f"vocabulary size {corpus.vocab.size}"
        )
    if weights is None:
        weights = MixtureWeights()
    tables = build_tables(
        corpus.ids, STYLE_ORDERS, smoothing.k, smoothing.top_k, smoothing.vocab_size
    )
    return StylePrior(tables, weights, smoothing, corpus.vocab.fingerprint())


def save_prior(prior: StylePrior, path) -> None:
    """Serialize to the binary table format (little-endian, magic ``NGSP``)."""
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<H", _FORMAT_VERSION)
    out += struct.pack("<d", prior.smoothing.k)
    out += struct.pack("<I", prior.smoothing.top_k)
    out += struct.pack("<I", prior.smoothing.vocab_size)
    out += prior.fingerprint
    out += struct.pack("<3d", *prior.weights.as_tuple())
    for n in STYLE_ORDERS:
        table = prior.tables[n]
        out += struct.pack("<Q", len(table.entries))
        for ctx in sorted(table.entries):
            entry = table.entries[ctx]
            if len(entry) > 0xFFFF:
                raise PriorError("per-context entry count exceeds u16 range")
            out += struct.pack(f"<{n - 1}I", *ctx)
            out += struct.pack("<Q", table.totals[ctx])
            out += struct.pack("<H", len(entry))
            for tok, (count, logprob) in entry.items():
                out += struct.pack("<IQd", tok, count, logprob)
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise PriorFormatError("truncated prior file")
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values


def load_prior(path, vocab: Vocabulary | None = None) -> StylePrior:
    """Load a prior written by :func:`save_prior`.

    A supplied vocabulary must match the stored fingerprint and size.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    (magic,) = r.take("<4s")
    if magic != _MAGIC:
        raise PriorFormatError(f"bad magic {magic!r}")
    (version,) = r.take("<H")
    if version != _FORMAT_VERSION:
        raise PriorVersionError(f"unsupported prior format version {version}")
    (k,) = r.take("<d")
    (top_k,) = r.take("<I")
    (vocab_size,) = r.take("<I")
    (fingerprint,) = r.take("<8s")
    w1, w2, w3 = r.take("<3d")
    if vocab is not None:
        if vocab.fingerprint() != fingerprint:
            raise PriorFingerprintError(
                "prior fingerprint does not match the supplied vocabulary"
            )
        if vocab.size != vocab_size:
            raise PriorFingerprintError(
                f"prior V={vocab_size} does not match vocabulary size {vocab.size}"
            )
    tables: dict[int, NgramTable] = {}
    for n in STYLE_ORDERS:
        (ctx_count,) = r.take("<Q")
        entries: dict[tuple[int, ...], dict[int, tuple[int, float]]] = {}
        totals: dict[tuple[int, ...], int] = {}
        for _ in range(ctx_count):
            ctx = tuple(r.take(f"<{n - 1}I"))
            (total,) = r.take("<Q")
            (entry_count,) = r.take("<H")
            entry: dict[int, tuple[int, float]] = {}
            for _ in range(entry_count):
                tok, count, logprob = r.take("<IQd")
                entry[tok] = (count, logprob)
            entries[ctx] = entry
            totals[ctx] = total
        tables[n] = NgramTable(n, entries, totals)
    if r.pos != len(data):
        raise PriorFormatError("trailing data after prior tables")
    smoothing = SmoothingConfig(vocab_size=vocab_size, k=k, top_k=top_k)
    weights = MixtureWeights(w1, w2, w3)
    return StylePrior(tables, weights, smoothing, fingerprint)
