"""Score steered generations: style PPL, base PPL, JSD, token overlap.

Style perplexity is computed under the mixture prior, base perplexity under
the unsteered base model, and the Jensen-Shannon divergence per decoding
step quantifies how hard the prior pushed each distribution.
"""
from stylesteer import (
    ReferenceBaseLM,
    SteeringConfig,
    build_lexicon,
    build_prior,
    build_vocabulary,
    compute_report,
    decode,
    tokenize,
)
from stylesteer.metrics import aggregate
from stylesteer.sampletext import chivalric_text, headline_text

base_text = headline_text(30_000, seed=4)
style_text = chivalric_text(30_000, seed=5)
vocab = build_vocabulary(base_text + "\n" + style_text, max_vocab=8192)

provider = ReferenceBaseLM(tokenize(base_text, vocab, source="news"))
style_corpus = tokenize(style_text, vocab, source="archaic")
prior = build_prior(style_corpus)
lexicon = build_lexicon(style_corpus)

prompts = (
    "markets rally as the",
    "the noble knight rode",
    "why lawmakers now back",
)

header = f"{'lambda':>6} {'style_ppl':>10} {'base_ppl':>9} {'jsd_bits':>9} {'uni':>5} {'bi':>5}"
for lam in (0.0, 0.2, 1.0):
    print(f"\nlambda = {lam}")
    print(header)
    reports = []
    for i, prompt in enumerate(prompts):
        config = SteeringConfig(lam=lam, max_new_tokens=48, seed=i)
        record = decode(provider, prior, tokenize(prompt, vocab).ids, config)
        report = compute_report(record, prior, lexicon, provider)
        reports.append(report)
        print(
            f"{lam:>6} {report.style_ppl:>10.1f} {report.base_ppl:>9.2f} "
            f"{report.mean_jsd_bits:>9.2e} {report.unigram_overlap:>5.2f} "
            f"{report.bigram_seen if report.bigram_seen is not None else float('nan'):>5.2f}"
        )
    summary = aggregate(reports)
    cv = summary["style_ppl"]["cv"]
    print(
        f"  mean style PPL {summary['style_ppl']['mean']:.1f}"
        f"  (population std {summary['style_ppl']['std']:.1f}, CV {cv:.2f})"
    )
