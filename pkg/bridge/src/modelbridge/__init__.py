"""Serve per-step transformer logits over the newline-delimited JSON protocol."""

from .models import ModelError, StubModel, TransformersModel, load_model
from .server import Bridge, BridgeConfig, export_vocab, serve
from .vocab import (
    BOT_TOKEN,
    NUM_SPECIALS,
    UNK_TOKEN,
    VocabError,
    fingerprint,
    read_vocab_file,
    shared_tokens,
    write_vocab_file,
)

__version__ = "0.1.0"
