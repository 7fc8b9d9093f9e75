"""Steer a frozen base model toward a style at increasing strengths.

The base model is the self-contained order-4 n-gram reference LM trained on
newsy headlines; the style prior comes from archaic narrative prose. As
lambda rises the generations drift away from the base model's preferences.
"""
from stylesteer import (
    ReferenceBaseLM,
    SteeringConfig,
    build_prior,
    build_vocabulary,
    decode,
    detokenize,
    tokenize,
)
from stylesteer.sampletext import chivalric_text, headline_text

base_text = headline_text(30_000, seed=1)
style_text = chivalric_text(30_000, seed=2)
vocab = build_vocabulary(base_text + "\n" + style_text, max_vocab=8192)

provider = ReferenceBaseLM(tokenize(base_text, vocab, source="news"))
prior = build_prior(tokenize(style_text, vocab, source="archaic"))

prompt = tokenize("officials approve the", vocab).ids

print("greedy decoding, 24 new tokens:\n")
for lam in (0.0, 0.1, 0.5, 1.0):
    config = SteeringConfig(lam=lam, mode="greedy", max_new_tokens=24)
    record = decode(provider, prior, prompt, config)
    jsd = sum(record.step_jsd_bits) / len(record.step_jsd_bits)
    print(f"lambda={lam:.1f}  mean step JSD={jsd:.2e} bits")
    print("  " + detokenize(record.token_ids, vocab))
    print()

print("top-p sampling (p=0.9, temperature 1.0) is reproducible per seed:\n")
config = SteeringConfig(lam=0.3, mode="top-p", top_p=0.9, max_new_tokens=24, seed=11)
first = decode(provider, prior, prompt, config)
second = decode(provider, prior, prompt, config)
assert first.token_ids == second.token_ids
print("  " + detokenize(first.token_ids, vocab))
