"""Decoding-time style steering with interpolated n-gram logit priors."""

from .tokenizer import (
    BOT_ID,
    BOT_TOKEN,
    UNK_ID,
    UNK_TOKEN,
    TokenizedCorpus,
    TokenizerError,
    TokenizerSpec,
    VocabFileError,
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_external_vocab,
    save_vocab_file,
    surface_tokens,
    tokenize,
)
from .prior import (
    DEFAULT_K,
    DEFAULT_TOP_K,
    MixtureWeights,
    NgramTable,
    PriorError,
    PriorFingerprintError,
    PriorFormatError,
    PriorVersionError,
    SmoothingConfig,
    StylePrior,
    build_prior,
    load_prior,
    save_prior,
)
from .providers import (
    ContextError,
    LogitProvider,
    LogitVector,
    ProviderDescriptor,
    ProviderError,
    ReferenceBaseLM,
    UniformProvider,
    log_softmax,
    softmax,
)
from .wire import (
    FingerprintMismatch,
    ProtocolError,
    ProviderServer,
    RemoteProvider,
    RemoteRequestError,
    TransportError,
    WireError,
)
from .decoding import (
    DecodeError,
    GenerationAborted,
    GenerationRecord,
    SteeringConfig,
    decode,
    inject,
    jsd_bits,
    nucleus_sample,
)
from .metrics import (
    MetricReport,
    MetricsError,
    StyleLexicon,
    aggregate,
    base_perplexity,
    build_lexicon,
    compute_report,
    lexicon_from_prior,
    mean_jsd,
    overlap_rates,
    style_perplexity,
)
from .sweep import (
    SweepConfig,
    SweepError,
    SweepReport,
    cell_seed,
    evaluate_external,
    pareto_frontier,
    prompt_prefix_mode,
    reservoir_sample_lines,
    run_sweep,
)
from .reports import emit_reports, load_rows
from .prompts import DEFAULT_LAMBDA_GRID, DEFAULT_PROMPTS

__version__ = "0.1.0"
