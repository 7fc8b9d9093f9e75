"""Logit injection and the greedy / nucleus decoding loops.

At each step the style prior contributes a sparse additive update to the
base model's logits, scaled by the steering strength lambda:

    steered[i] = base[i] + lambda * delta[i]

with delta nonzero only for tokens stored in the prior's tables for the
current context. Lambda 0 must be perfectly transparent: identical token
streams and zero per-step divergence.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .prior import StylePrior
from .providers import (
    LogitProvider,
    LogitVector,
    ProviderDescriptor,
    ProviderError,
    softmax,
    log_softmax,
)

DECODE_MODES = ("greedy", "top-p")
RETENTION_MODES = ("scalars", "full")


class DecodeError(ValueError):
    """Invalid decoding configuration or input."""


class GenerationAborted(RuntimeError):
    """Provider failed mid-generation; carries the partial record."""

    def __init__(self, message: str, record: "GenerationRecord"):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class SteeringConfig:
    lam: float = 0.0
    mode: str = "greedy"
    top_p: float = 0.9
    temperature: float = 1.0
    max_new_tokens: int = 256
    seed: int = 0
    retention: str = "scalars"

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise DecodeError(f"lambda must be in [0, 1], got {self.lam}")
        if self.mode not in DECODE_MODES:
            raise DecodeError(f"unknown decode mode {self.mode!r}")
        if not 0.0 < self.top_p <= 1.0:
            raise DecodeError(f"top-p must be in (0, 1], got {self.top_p}")
        if self.temperature <= 0.0:
            raise DecodeError("temperature must be positive")
        if self.max_new_tokens < 1:
            raise DecodeError("max_new_tokens must be >= 1")
        if self.retention not in RETENTION_MODES:
            raise DecodeError(f"unknown retention mode {self.retention!r}")

    def with_lambda(self, lam: float) -> "SteeringConfig":
        return replace(self, lam=lam)


@dataclass(eq=False)
class GenerationRecord:
    """One generation plus the per-step data the metrics need.

    Scalar retention keeps per-step divergence and the chosen token's base
    log-probability; full retention additionally keeps both distributions.
    """

    prompt_ids: tuple[int, ...]
    token_ids: tuple[int, ...]
    step_jsd_bits: tuple[float, ...]
    step_base_logprob: tuple[float, ...]
    config: SteeringConfig | None = None
    provider: ProviderDescriptor | None = None
    base_dists: tuple[np.ndarray, ...] | None = None
    steered_dists: tuple[np.ndarray, ...] | None = None
    partial: bool = False

    @property
    def token_count(self) -> int:
        return len(self.token_ids)


def inject(base: LogitVector, deltas: dict[int, float], lam: float) -> LogitVector:
    """Apply the sparse lambda-scaled update; the input vector is unchanged."""
    if not 0.0 <= lam <= 1.0:
        raise DecodeError(f"lambda must be in [0, 1], got {lam}")
    out = base.values.copy()
    v = len(out)
    for tok, delta in deltas.items():
        if not 0 <= tok < v:
            raise DecodeError(f"delta key {tok} out of range for V={v}")
        out[tok] += lam * delta
    return LogitVector(out, step=base.step)


def nucleus_sample(dist: np.ndarray, p: float, rng: np.random.Generator) -> int:
    """Sample from the smallest descending-probability prefix with mass >= p.

    Ties sort by ascending token id; the prefix is renormalized before the
    draw, so the chosen id always lies inside it.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if not np.all(np.isfinite(dist)):
        raise DecodeError("distribution contains non-finite values")
    if abs(float(dist.sum()) - 1.0) > 1e-6:
        raise DecodeError("distribution does not sum to 1")
    if not 0.0 < p <= 1.0:
        raise DecodeError(f"top-p must be in (0, 1], got {p}")
    order = np.lexsort((np.arange(len(dist)), -dist))
    cum = np.cumsum(dist[order])
    cut = int(np.searchsorted(cum, p, side="left"))
    cut = min(cut, len(dist) - 1)
    kept = order[: cut + 1]
    kept_cum = np.cumsum(dist[kept])
    mass = float(kept_cum[-1])
    r = rng.random() * mass
    idx = int(np.searchsorted(kept_cum, r, side="right"))
    idx = min(idx, len(kept) - 1)
    return int(kept[idx])


def jsd_bits(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in bits between two distributions."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    return 0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m)


def _kl_bits(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / m[mask])))


def decode(
    provider: LogitProvider,
    prior: StylePrior | None,
    prompt_ids,
    config: SteeringConfig,
) -> GenerationRecord:
    """Run one steered generation of exactly ``max_new_tokens`` tokens.

    ``prior=None`` decodes unsteered. Greedy breaks ties by ascending id;
    top-p sampling uses the seeded generator over the temperature-scaled
    steered distribution. Provider failures abort with a partial record.
    """
    prompt = tuple(int(t) for t in prompt_ids)
    if not prompt:
        raise DecodeError("prompt must be non-empty")
    if prior is not None and provider.descriptor.fingerprint != prior.fingerprint:
        raise DecodeError("provider and prior vocabulary fingerprints differ")

    rng = np.random.default_rng(config.seed)
    keep_full = config.retention == "full"
    ctx: list[int] = list(prompt)
    tokens: list[int] = []
    jsds: list[float] = []
    base_lps: list[float] = []
    base_dists: list[np.ndarray] = []
    steered_dists: list[np.ndarray] = []

    for step in range(config.max_new_tokens):
        try:
            base = provider.next_logits(ctx)
        except ProviderError as exc:
            record = GenerationRecord(
                prompt_ids=prompt,
                token_ids=tuple(tokens),
                step_jsd_bits=tuple(jsds),
                step_base_logprob=tuple(base_lps),
                config=config,
                provider=provider.descriptor,
                base_dists=tuple(base_dists) if keep_full else None,
                steered_dists=tuple(steered_dists) if keep_full else None,
                partial=True,
            )
            raise GenerationAborted(f"provider failed at step {step}: {exc}", record)

        deltas = prior.injection_terms(ctx[-2:]) if prior is not None else {}
        steered = inject(base, deltas, config.lam)

        p_base = softmax(base.values)
        p_steered = softmax(steered.values)
        jsds.append(jsd_bits(p_base, p_steered))
        if keep_full:
            base_dists.append(p_base)
            steered_dists.append(p_steered)

        if config.mode == "greedy":
            tok = int(np.argmax(steered.values))
        else:
            if config.temperature != 1.0:
                sample_dist = softmax(steered.values / config.temperature)
            else:
                sample_dist = p_steered
            tok = nucleus_sample(sample_dist, config.top_p, rng)

        base_lps.append(float(log_softmax(base.values)[tok]))
        tokens.append(tok)
        ctx.append(tok)

    return GenerationRecord(
        prompt_ids=prompt,
        token_ids=tuple(tokens),
        step_jsd_bits=tuple(jsds),
        step_base_logprob=tuple(base_lps),
        config=config,
        provider=provider.descriptor,
        base_dists=tuple(base_dists) if keep_full else None,
        steered_dists=tuple(steered_dists) if keep_full else None,
    )
