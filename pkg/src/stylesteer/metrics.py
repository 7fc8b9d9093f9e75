"""Generation quality metrics.

Style perplexity scores generated tokens under the mixture prior; base
perplexity scores them under the unsteered provider; the per-step
Jensen-Shannon divergence (bits) quantifies how far steering moved each
next-token distribution. Prompt tokens are excluded from every metric.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .decoding import GenerationRecord, jsd_bits
from .prior import StylePrior
from .providers import LogitProvider
from .tokenizer import TokenizedCorpus

TOP_UNIGRAMS = 5000


class MetricsError(ValueError):
    """Invalid metric input."""


@dataclass(frozen=True)
class MetricReport:
    style_ppl: float
    base_ppl: float
    mean_jsd_bits: float
    unigram_overlap: float
    bigram_seen: float | None
    token_count: int

    def as_dict(self) -> dict:
        return {
            "style_ppl": self.style_ppl,
            "base_ppl": self.base_ppl,
            "mean_jsd_bits": self.mean_jsd_bits,
            "unigram_overlap": self.unigram_overlap,
            "bigram_seen": self.bigram_seen,
            "T": self.token_count,
        }


@dataclass(frozen=True)
class StyleLexicon:
    top_unigrams: frozenset[int]
    seen_bigrams: frozenset[tuple[int, int]]


def build_lexicon(corpus: TokenizedCorpus, top_k: int = TOP_UNIGRAMS) -> StyleLexicon:
    """Top-k unigram set (ties at the cutoff by ascending id) and all seen bigrams."""
    counts = Counter(corpus.ids)
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    top = frozenset(ranked[:top_k])
    bigrams = frozenset(zip(corpus.ids, corpus.ids[1:]))
    return StyleLexicon(top_unigrams=top, seen_bigrams=bigrams)


def lexicon_from_prior(prior: StylePrior, top_k: int = TOP_UNIGRAMS) -> StyleLexicon:
    """Approximate lexicon from a prior's stored tables.

    Truncation caps what the tables retain, so this under-counts rare
    unigrams and bigrams; prefer :func:`build_lexicon` on the corpus itself.
    """
    unigram_entry = prior.tables[1].entries.get((), {})
    ranked = sorted(unigram_entry, key=lambda t: (-unigram_entry[t][0], t))
    top = frozenset(ranked[:top_k])
    bigrams = frozenset(
        (ctx[0], tok)
        for ctx, entry in prior.tables[2].entries.items()
        for tok in entry
    )
    return StyleLexicon(top_unigrams=top, seen_bigrams=bigrams)


def style_perplexity(record: GenerationRecord, prior: StylePrior) -> float:
    """exp of the negative mean mixture log-probability over generated tokens."""
    t = record.token_count
    if t < 1:
        raise MetricsError("record has no generated tokens")
    seq = record.prompt_ids + record.token_ids
    start = len(record.prompt_ids)
    total = 0.0
    for i in range(start, len(seq)):
        context = seq[max(0, i - 2) : i]
        total += prior.mix_logprob(context, seq[i])
    return math.exp(-total / t)


def base_perplexity(record: GenerationRecord, provider: LogitProvider) -> float:
    """Perplexity of the generated tokens under the unsteered provider."""
    t = record.token_count
    if t < 1:
        raise MetricsError("record has no generated tokens")
    logprob = provider.sequence_logprob(record.token_ids, prefix=record.prompt_ids)
    return math.exp(-logprob / t)


def mean_jsd(record: GenerationRecord) -> float:
    """Mean per-step divergence between base and steered distributions (bits)."""
    if record.token_count < 1:
        raise MetricsError("record has no generated tokens")
    if record.base_dists is not None and record.steered_dists is not None:
        if len(record.base_dists) != record.token_count:
            raise MetricsError("record lacks distributions")
        steps = [
            jsd_bits(p, q) for p, q in zip(record.base_dists, record.steered_dists)
        ]
    elif record.step_jsd_bits and len(record.step_jsd_bits) == record.token_count:
        steps = list(record.step_jsd_bits)
    else:
        raise MetricsError("record lacks distributions")
    return sum(steps) / len(steps)


def overlap_rates(
    record: GenerationRecord, lexicon: StyleLexicon
) -> tuple[float, float | None]:
    """(unigram overlap rate, bigram seen rate) over generated tokens only.

    The bigram rate needs at least two generated tokens and is None otherwise;
    pairs never cross the prompt boundary.
    """
    t = record.token_count
    if t < 1:
        raise MetricsError("record has no generated tokens")
    gen = record.token_ids
    unigram = sum(1 for tok in gen if tok in lexicon.top_unigrams) / t
    if t < 2:
        return unigram, None
    pairs = list(zip(gen, gen[1:]))
    bigram = sum(1 for pair in pairs if pair in lexicon.seen_bigrams) / len(pairs)
    return unigram, bigram


def compute_report(
    record: GenerationRecord,
    prior: StylePrior,
    lexicon: StyleLexicon,
    provider: LogitProvider,
) -> MetricReport:
    """Full metric pipeline for one generation."""
    unigram, bigram = overlap_rates(record, lexicon)
    return MetricReport(
        style_ppl=style_perplexity(record, prior),
        base_ppl=base_perplexity(record, provider),
        mean_jsd_bits=mean_jsd(record),
        unigram_overlap=unigram,
        bigram_seen=bigram,
        token_count=record.token_count,
    )


def aggregate(values_or_reports) -> dict:
    """Mean, population std and coefficient of variation per metric.

    Accepts a list of MetricReports; the CV is absent (None) when the mean
    is zero. Bigram rates of None are skipped.
    """
    reports = list(values_or_reports)
    if not reports:
        raise MetricsError("nothing to aggregate")
    fields = ("style_ppl", "base_ppl", "mean_jsd_bits", "unigram_overlap", "bigram_seen")
    out: dict = {"n": len(reports)}
    for name in fields:
        values = [getattr(r, name) for r in reports]
        values = [v for v in values if v is not None]
        if not values:
            continue
        out[name] = summarize(values)
    return out


def summarize(values) -> dict:
    """Mean / population std / CV for one list of numbers."""
    values = [float(v) for v in values]
    if not values:
        raise MetricsError("nothing to aggregate")
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    std = math.sqrt(var)
    cv = std / mean if mean != 0.0 else None
    return {"mean": mean, "std": std, "cv": cv}
