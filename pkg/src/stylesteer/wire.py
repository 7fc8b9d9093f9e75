"""Newline-delimited JSON logits protocol.

One JSON object per line over a stream socket. The first exchange on a
connection is the hello handshake:

    -> {"op": "hello"}
    <- {"vocab_size": V, "fingerprint": "<16 hex chars>", "name": "..."}

then one request in flight at a time:

    -> {"id": n, "op": "logits", "context": [ids...]}
    <- {"id": n, "logits": [V floats]}  or  {"id": n, "error": "..."}

Malformed JSON receives an error object and the connection is closed.
"""
from __future__ import annotations

import json
import socket
import threading

import numpy as np

from .providers import LogitProvider, LogitVector, ProviderDescriptor, ProviderError
from .tokenizer import Vocabulary


class WireError(ProviderError):
    """Base class for protocol-level failures."""


class TransportError(WireError):
    """Socket-level failure: connect, send, receive, unexpected EOF."""


class ProtocolError(WireError):
    """Peer sent something outside the protocol."""


class FingerprintMismatch(WireError):
    """Server vocabulary does not match the local one."""


class RemoteRequestError(WireError):
    """Server answered a request with an error object."""


def _parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ProtocolError(f"invalid address {address!r}, expected host:port")
    return host or "127.0.0.1", int(port)


class RemoteProvider(LogitProvider):
    """Client side of the logits protocol.

    When a vocabulary is supplied, the hello fingerprint and size must match.
    A provider owns one connection; calls are serialized with a lock.
    """

    def __init__(
        self,
        address: str,
        vocab: Vocabulary | None = None,
        timeout: float = 30.0,
        context_limit: int = 1 << 20,
    ):
        host, port = _parse_address(address)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"connect to {address} failed: {exc}") from exc
        self._rf = self._sock.makefile("rb")
        self._wf = self._sock.makefile("wb")
        self._lock = threading.Lock()
        self._next_id = 0
        hello = self._roundtrip({"op": "hello"})
        vocab_size = hello.get("vocab_size")
        fingerprint = hello.get("fingerprint")
        if not isinstance(vocab_size, int) or vocab_size < 2:
            raise ProtocolError(f"bad hello vocab_size: {vocab_size!r}")
        if not isinstance(fingerprint, str) or len(fingerprint) != 16:
            raise ProtocolError(f"bad hello fingerprint: {fingerprint!r}")
        try:
            fp_bytes = bytes.fromhex(fingerprint)
        except ValueError as exc:
            raise ProtocolError(f"bad hello fingerprint: {fingerprint!r}") from exc
        if vocab is not None:
            if vocab.size != vocab_size:
                raise FingerprintMismatch(
                    f"server V={vocab_size}, local vocabulary V={vocab.size}"
                )
            if vocab.fingerprint() != fp_bytes:
                raise FingerprintMismatch(
                    "server fingerprint does not match local vocabulary"
                )
        self.name = hello.get("name", "")
        self.descriptor = ProviderDescriptor(
            kind="remote",
            fingerprint=fp_bytes,
            vocab_size=vocab_size,
            context_limit=context_limit,
        )

    def _roundtrip(self, obj: dict) -> dict:
        try:
            self._wf.write(json.dumps(obj).encode("utf-8") + b"\n")
            self._wf.flush()
            line = self._rf.readline()
        except OSError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if not line:
            raise TransportError("connection closed by server")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable response: {exc}") from exc
        if not isinstance(resp, dict):
            raise ProtocolError("response is not a JSON object")
        return resp

    def next_logits(self, context) -> LogitVector:
        ctx = self._check_context(context)
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            resp = self._roundtrip({"id": req_id, "op": "logits", "context": ctx})
        if resp.get("id") != req_id:
            raise ProtocolError(
                f"response id {resp.get('id')!r} does not match request {req_id}"
            )
        if "error" in resp:
            raise RemoteRequestError(str(resp["error"]))
        logits = resp.get("logits")
        if not isinstance(logits, list) or len(logits) != self.descriptor.vocab_size:
            got = len(logits) if isinstance(logits, list) else type(logits).__name__
            raise ProtocolError(
                f"logits length {got} != vocab size {self.descriptor.vocab_size}"
            )
        values = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ProtocolError("non-finite logit in response")
        return LogitVector(values, step=len(ctx))

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "RemoteProvider":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ProviderServer:
    """Serves an in-process provider over the wire protocol.

    One thread per connection; requests within a connection are sequential.
    """

    def __init__(
        self,
        provider: LogitProvider,
        name: str = "stylesteer-reference",
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.provider = provider
        self.name = name
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen()
        self._listener.settimeout(0.25)  # lets the accept loop notice stop()
        self.host, self.port = self._listener.getsockname()
        self._stopping = threading.Event()
        self._accept_thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> str:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self.address

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._accept_loop()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            threading.Thread(
                target=self._handle, args=(conn,), daemon=True
            ).start()

    def _handle(self, conn: socket.socket) -> None:
        rf = conn.makefile("rb")
        wf = conn.makefile("wb")

        def send(obj: dict) -> None:
            wf.write(json.dumps(obj).encode("utf-8") + b"\n")
            wf.flush()

        try:
            for line in rf:
                try:
                    req = json.loads(line)
                except json.JSONDecodeError:
                    send({"error": "malformed json"})
                    return
                if not isinstance(req, dict):
                    send({"error": "request is not a JSON object"})
                    return
                op = req.get("op")
                if op == "hello":
                    send(
                        {
                            "vocab_size": self.provider.descriptor.vocab_size,
                            "fingerprint": self.provider.descriptor.fingerprint.hex(),
                            "name": self.name,
                        }
                    )
                    continue
                req_id = req.get("id")
                if not isinstance(req_id, int):
                    send({"error": "missing or non-integer request id"})
                    return
                if op != "logits":
                    send({"id": req_id, "error": f"unknown op {op!r}"})
                    continue
                context = req.get("context")
                if not isinstance(context, list) or not all(
                    isinstance(t, int) for t in context
                ):
                    send({"id": req_id, "error": "context must be a list of ints"})
                    continue
                try:
                    logits = self.provider.next_logits(context)
                except ProviderError as exc:
                    send({"id": req_id, "error": str(exc)})
                    continue
                send({"id": req_id, "logits": [float(x) for x in logits.values]})
        except (OSError, ValueError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
