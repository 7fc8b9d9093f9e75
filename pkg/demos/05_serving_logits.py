"""The newline-delimited JSON logits protocol, end to end.

A server wraps any in-process provider; the remote client performs the
hello handshake, checks the vocabulary fingerprint, and then streams
one logits request per decoding step. Decoding through the wire matches
in-process decoding token for token.
"""
import json
import socket

from stylesteer import (
    ProviderServer,
    ReferenceBaseLM,
    RemoteProvider,
    SteeringConfig,
    build_prior,
    build_vocabulary,
    decode,
    detokenize,
    tokenize,
)
from stylesteer.sampletext import chivalric_text, headline_text

base_text = headline_text(15_000, seed=41)
style_text = chivalric_text(15_000, seed=42)
vocab = build_vocabulary(base_text + "\n" + style_text, max_vocab=8192)
lm = ReferenceBaseLM(tokenize(base_text, vocab, source="news"))
prior = build_prior(tokenize(style_text, vocab, source="archaic"))

server = ProviderServer(lm, name="demo-reference")
address = server.start()
print(f"serving logits on {address}")

# Raw protocol exchange, no client wrapper:
sock = socket.create_connection((server.host, server.port))
sock.sendall(b'{"op": "hello"}\n')
hello = json.loads(sock.makefile("rb").readline())
print("hello ->", hello)
sock.close()

# The provider wrapper does the same and then behaves like a local model.
prompt = tokenize("officials approve the", vocab).ids
config = SteeringConfig(lam=0.2, max_new_tokens=16)
with RemoteProvider(address, vocab=vocab) as remote:
    over_wire = decode(remote, prior, prompt, config)
in_process = decode(lm, prior, prompt, config)

assert over_wire.token_ids == in_process.token_ids
print("\nremote and in-process decodes agree:")
print("  " + detokenize(over_wire.token_ids, vocab))

server.stop()
