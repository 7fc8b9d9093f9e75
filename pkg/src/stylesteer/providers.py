"""Next-token logit providers.

A provider turns a token-id context into a length-V vector of pre-softmax
scores. The in-process reference model is an order-4 n-gram LM whose logits
are exact log-probabilities, so perplexities computed against it are
analytically checkable; remote providers live in :mod:`stylesteer.wire`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prior import DEFAULT_K, build_tables
from .tokenizer import BOT_ID, TokenizedCorpus, Vocabulary


class ProviderError(Exception):
    """Base class for provider failures."""


class ContextError(ProviderError):
    """Context violates the provider's preconditions."""


@dataclass
class LogitVector:
    values: np.ndarray
    step: int = 0

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProviderDescriptor:
    kind: str
    fingerprint: bytes
    vocab_size: int
    context_limit: int


def softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - np.max(values)
    exp = np.exp(shifted)
    return exp / exp.sum()


def log_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - np.max(values)
    return shifted - np.log(np.exp(shifted).sum())


class LogitProvider:
    """Interface shared by in-process and remote providers."""

    descriptor: ProviderDescriptor

    def next_logits(self, context) -> LogitVector:
        raise NotImplementedError

    def sequence_logprob(self, tokens, prefix=()) -> float:
        """Total log-probability of ``tokens`` after ``prefix``, step by step."""
        tokens = list(tokens)
        if not tokens:
            raise ProviderError("empty token sequence")
        ctx = list(prefix)
        total = 0.0
        for tok in tokens:
            logits = self.next_logits(ctx)
            total += float(log_softmax(logits.values)[tok])
            ctx.append(tok)
        return total

    def _check_context(self, context) -> list[int]:
        ctx = [int(t) for t in context]
        if len(ctx) > self.descriptor.context_limit:
            raise ContextError(
                f"context length {len(ctx)} exceeds limit "
                f"{self.descriptor.context_limit}"
            )
        v = self.descriptor.vocab_size
        for t in ctx:
            if not 0 <= t < v:
                raise ContextError(f"token id {t} out of range for V={v}")
        return ctx


DEFAULT_BASE_ORDERS = (1, 2, 3, 4)
DEFAULT_BASE_WEIGHTS = (0.1, 0.2, 0.3, 0.4)


class ReferenceBaseLM(LogitProvider):
    """Self-contained order-4 n-gram language model.

    Tables are untruncated so each order's smoothed distribution is exactly
    normalized; the next-token distribution is the presence-weighted mixture
    over orders and the logits are its log divided by the temperature.
    """

    def __init__(
        self,
        corpus: TokenizedCorpus,
        k: float = DEFAULT_K,
        orders=DEFAULT_BASE_ORDERS,
        weights=DEFAULT_BASE_WEIGHTS,
        temperature: float = 1.0,
        context_limit: int = 4096,
        name: str = "reference-lm",
    ):
        if len(orders) != len(weights):
            raise ProviderError("orders and weights must align")
        if temperature <= 0:
            raise ProviderError("temperature must be positive")
        v = corpus.vocab.size
        self.orders = tuple(orders)
        self.weights = tuple(float(w) for w in weights)
        self.k = float(k)
        self.temperature = float(temperature)
        self.name = name
        self.vocab = corpus.vocab
        self.tables = build_tables(corpus.ids, self.orders, k, top_k=v, vocab_size=v)
        self.descriptor = ProviderDescriptor(
            kind="reference",
            fingerprint=corpus.vocab.fingerprint(),
            vocab_size=v,
            context_limit=context_limit,
        )
        self._unigram_dense = self._dense(1, ())

    def _dense(self, order: int, ctx: tuple[int, ...]) -> np.ndarray | None:
        """Exactly normalized smoothed distribution for one order, or None."""
        table = self.tables[order]
        total = table.totals.get(ctx)
        if total is None:
            return None
        v = self.descriptor.vocab_size
        denom = total + self.k * v
        dist = np.full(v, self.k / denom)
        entry = table.entries[ctx]
        if entry:
            toks = np.fromiter(entry.keys(), dtype=np.int64, count=len(entry))
            counts = np.fromiter(
                (c for c, _ in entry.values()), dtype=np.float64, count=len(entry)
            )
            dist[toks] = (counts + self.k) / denom
        return dist

    def distribution(self, context) -> np.ndarray:
        """Presence-weighted mixture over orders; uniform if nothing matches."""
        ctx = tuple(self._check_context(context))
        v = self.descriptor.vocab_size
        num = np.zeros(v)
        den = 0.0
        max_hist = max(self.orders) - 1
        padded = (BOT_ID,) * max(0, max_hist - len(ctx)) + ctx
        for order, w in zip(self.orders, self.weights):
            if w == 0.0:
                continue
            sub = padded[len(padded) - (order - 1) :] if order > 1 else ()
            dense = self._unigram_dense if order == 1 else self._dense(order, sub)
            if dense is None:
                continue
            num += w * dense
            den += w
        if den == 0.0:
            return np.full(v, 1.0 / v)
        return num / den

    def next_logits(self, context) -> LogitVector:
        dist = self.distribution(context)
        return LogitVector(np.log(dist) / self.temperature, step=len(context))


class UniformProvider(LogitProvider):
    """All-zero logits: softmax is the uniform distribution."""

    def __init__(self, vocab: Vocabulary, context_limit: int = 1 << 20):
        self.vocab = vocab
        self.descriptor = ProviderDescriptor(
            kind="reference",
            fingerprint=vocab.fingerprint(),
            vocab_size=vocab.size,
            context_limit=context_limit,
        )

    def next_logits(self, context) -> LogitVector:
        ctx = self._check_context(context)
        return LogitVector(np.zeros(self.descriptor.vocab_size), step=len(ctx))
