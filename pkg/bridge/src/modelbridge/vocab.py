"""The shared token-id space and vocabulary file format.

Ids 0 and 1 are reserved for the begin-of-text and unknown tokens; a
vocabulary file lists every other token, one per line, line i holding the
token with id i + 2. The 8-byte fingerprint hashes all token strings
(specials included) joined with newlines; both sides of the protocol must
compute it identically.
"""
from __future__ import annotations

import hashlib

BOT_TOKEN = "<bot>"
UNK_TOKEN = "<unk>"
NUM_SPECIALS = 2


class VocabError(ValueError):
    pass


def fingerprint(tokens: list[str]) -> bytes:
    return hashlib.sha256("\n".join(tokens).encode("utf-8")).digest()[:8]


def shared_tokens(file_tokens: list[str]) -> list[str]:
    """Full shared-space token list: specials then the file tokens."""
    return [BOT_TOKEN, UNK_TOKEN, *file_tokens]


def validate_file_tokens(tokens: list[str]) -> None:
    seen = {BOT_TOKEN, UNK_TOKEN}
    for i, tok in enumerate(tokens):
        if tok == "":
            raise VocabError(f"token {i} is empty")
        if any(ch.isspace() for ch in tok):
            raise VocabError(f"token {i} ({tok!r}) contains whitespace")
        if tok in seen:
            raise VocabError(f"duplicate token {tok!r}")
        seen.add(tok)


def read_vocab_file(path) -> list[str]:
    """File tokens in order (shared ids 2..); specials are implicit."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    validate_file_tokens(lines)
    return lines


def write_vocab_file(file_tokens: list[str], path) -> None:
    validate_file_tokens(file_tokens)
    with open(path, "w", encoding="utf-8") as fh:
        for tok in file_tokens:
            fh.write(tok + "\n")
