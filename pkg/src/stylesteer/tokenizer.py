"""Corpus ingestion and the shared token-id space.

Every component (priors, metrics, logit providers) speaks one vocabulary.
Ids are dense integers; id 0 is the begin-of-text marker and id 1 absorbs
anything out of vocabulary.
"""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass

BOT_TOKEN = "<bot>"
UNK_TOKEN = "<unk>"
BOT_ID = 0
UNK_ID = 1
NUM_SPECIALS = 2

_SURFACE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

_KINDS = ("reference-word-level", "external-vocab-file")
_NORMALIZATIONS = ("none", "lowercase")


class TokenizerError(ValueError):
    """Bad tokenizer input (empty corpus, invalid spec)."""


class VocabFileError(TokenizerError):
    """External vocabulary file could not be parsed."""


@dataclass(frozen=True)
class TokenizerSpec:
    kind: str = "reference-word-level"
    normalization: str = "none"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise TokenizerError(f"unknown tokenizer kind: {self.kind!r}")
        if self.normalization not in _NORMALIZATIONS:
            raise TokenizerError(f"unknown normalization: {self.normalization!r}")


class Vocabulary:
    """Immutable id <-> token bijection with two reserved special ids."""

    __slots__ = ("tokens", "spec", "_index")

    def __init__(self, tokens: tuple[str, ...], spec: TokenizerSpec):
        if len(tokens) < NUM_SPECIALS:
            raise TokenizerError("vocabulary must contain the two special tokens")
        if tokens[BOT_ID] != BOT_TOKEN or tokens[UNK_ID] != UNK_TOKEN:
            raise TokenizerError("special tokens must occupy ids 0 and 1")
        index: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if tok in index:
                raise TokenizerError(f"duplicate token {tok!r}")
            index[tok] = i
        self.tokens = tuple(tokens)
        self.spec = spec
        self._index = index

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def bot_id(self) -> int:
        return BOT_ID

    @property
    def unk_id(self) -> int:
        return UNK_ID

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(self.tokens)

    def fingerprint(self) -> bytes:
        """8-byte digest over the full ordered token list (specials included)."""
        joined = "\n".join(self.tokens).encode("utf-8")
        return hashlib.sha256(joined).digest()[:8]

    def fingerprint_hex(self) -> str:
        return self.fingerprint().hex()


@dataclass(frozen=True)
class TokenizedCorpus:
    ids: tuple[int, ...]
    source: str
    vocab: Vocabulary

    @property
    def token_count(self) -> int:
        return len(self.ids)


def surface_tokens(text: str, normalization: str = "none") -> list[str]:
    """Split text into word and single-punctuation tokens."""
    if normalization == "lowercase":
        text = text.lower()
    return _SURFACE.findall(text)


def build_vocabulary(
    corpus_text: str,
    spec: TokenizerSpec = TokenizerSpec(),
    max_vocab: int = 65536,
) -> Vocabulary:
    """Build a vocabulary from a corpus: frequency order, ties by first occurrence.

    ``max_vocab`` caps the total entry count including the two specials; surface
    forms beyond the cap fall to the unknown id at tokenize time.
    """
    if max_vocab < NUM_SPECIALS:
        raise TokenizerError(f"max_vocab must be >= {NUM_SPECIALS}")
    surface = surface_tokens(corpus_text, spec.normalization)
    if not surface:
        raise TokenizerError("empty corpus")
    counts: Counter[str] = Counter(surface)
    first_seen: dict[str, int] = {}
    for pos, tok in enumerate(surface):
        if tok not in first_seen:
            first_seen[tok] = pos
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    kept = ranked[: max_vocab - NUM_SPECIALS]
    return Vocabulary((BOT_TOKEN, UNK_TOKEN, *kept), spec)


def tokenize(text: str, vocab: Vocabulary, source: str = "text") -> TokenizedCorpus:
    """Map text to ids under ``vocab``; out-of-vocabulary tokens become UNK."""
    surface = surface_tokens(text, vocab.spec.normalization)
    ids = tuple(vocab.id_of(tok) for tok in surface)
    return TokenizedCorpus(ids=ids, source=source, vocab=vocab)


def detokenize(ids, vocab: Vocabulary) -> str:
    """Space-join token strings; inverse of tokenize for special-free ids."""
    return " ".join(vocab.token_of(i) for i in ids)


def load_external_vocab(path, normalization: str = "none") -> Vocabulary:
    """Load a vocabulary file: UTF-8, one token per line, line 0 -> id 2.

    Empty or whitespace-bearing lines and duplicate tokens are rejected.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    tokens = [BOT_TOKEN, UNK_TOKEN]
    seen = {BOT_TOKEN, UNK_TOKEN}
    for lineno, line in enumerate(lines):
        if line == "":
            raise VocabFileError(f"{path}: line {lineno}: empty token")
        if any(ch.isspace() for ch in line):
            raise VocabFileError(f"{path}: line {lineno}: token contains whitespace")
        if line in seen:
            raise VocabFileError(f"{path}: line {lineno}: duplicate token {line!r}")
        seen.add(line)
        tokens.append(line)
    spec = TokenizerSpec(kind="external-vocab-file", normalization=normalization)
    return Vocabulary(tuple(tokens), spec)


def save_vocab_file(vocab: Vocabulary, path) -> None:
    """Write the non-special tokens in the external vocab file format."""
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens[NUM_SPECIALS:]:
            fh.write(tok + "\n")
