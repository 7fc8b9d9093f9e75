"""Build an interpolated 1-3 gram style prior and poke at its tables.

Everything here is self-contained: the corpus comes from the deterministic
sample-text generators, so rerunning the script prints the same numbers.
"""
import math

from stylesteer import (
    build_prior,
    build_vocabulary,
    save_prior,
    load_prior,
    tokenize,
)
from stylesteer.sampletext import chivalric_text

# ---------------------------------------------------------------- corpus
text = chivalric_text(20_000, seed=7)
print("corpus preview:")
print("  " + text[:160].replace("\n", " / ") + " ...")

vocab = build_vocabulary(text, max_vocab=4096)
corpus = tokenize(text, vocab, source="archaic-demo")
print(f"\nvocabulary: V={vocab.size} (ids 0/1 reserved for begin/unknown)")
print(f"corpus: {corpus.token_count} tokens")

# ----------------------------------------------------------------- prior
prior = build_prior(corpus)
for n in (1, 2, 3):
    table = prior.tables[n]
    print(f"order {n}: {table.context_count()} contexts")

# Conditional probabilities follow (count + k) / (total + k * V).
the = vocab.id_of("the")
knight = vocab.id_of("knight")
p = prior.prob(2, (the,), knight)
print(f"\nP(knight | the) = {p:.4f}")
print(f"P_mix(knight | 'the')     = {math.exp(prior.mix_logprob((the,), knight)):.4f}")
print(f"P_mix(knight | unseen id) = {math.exp(prior.mix_logprob((vocab.unk_id,), knight)):.4f}")

# The injection terms are the sparse per-token logit deltas used at decode
# time: weight * stored log-probability, summed over matching orders.
deltas = prior.injection_terms((the,))
strongest = sorted(deltas, key=deltas.get, reverse=True)[:5]
print("\nleast-penalized continuations after 'the':")
for tok in strongest:
    print(f"  {vocab.token_of(tok):<12} delta = {deltas[tok]:+.3f}")

# ------------------------------------------------------------ persistence
save_prior(prior, "/tmp/archaic-demo.ngsp")
reloaded = load_prior("/tmp/archaic-demo.ngsp", vocab=vocab)
assert reloaded.mix_logprob((the,), knight) == prior.mix_logprob((the,), knight)
print("\nsaved and reloaded bit-exactly -> /tmp/archaic-demo.ngsp")
