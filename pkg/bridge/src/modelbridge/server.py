"""Bridge server: one model instance behind the logits protocol.

Connections each get a thread; inference calls are serialized through a
single lock so only one request runs against the model at a time. Protocol
errors are answered in-band; malformed JSON gets an error object and the
connection closes.
"""
from __future__ import annotations

import json
import socket
import sys
import threading
from dataclasses import dataclass

from .models import ModelError, load_model


@dataclass
class BridgeConfig:
    model: str
    listen: str | None = None
    stdio: bool = False
    max_context: int = 2048
    fp16: bool = False

    def __post_init__(self) -> None:
        if bool(self.listen) == self.stdio:
            raise ValueError("exactly one of listen address or stdio required")
        if self.max_context < 1:
            raise ValueError("max_context must be positive")


def _parse_listen(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"invalid listen address {address!r}, expected host:port")
    return host or "127.0.0.1", int(port)


class Bridge:
    def __init__(self, config: BridgeConfig):
        self.config = config
        self.model = load_model(config.model, fp16=config.fp16)
        self._inference_lock = threading.Lock()

    # ------------------------------------------------------------ protocol
    def _hello(self) -> dict:
        return {
            "vocab_size": self.model.vocab_size,
            "fingerprint": self.model.fingerprint_hex(),
            "name": self.model.name,
        }

    def _answer(self, req: dict) -> dict:
        op = req.get("op")
        if op == "hello":
            return self._hello()
        req_id = req.get("id")
        if not isinstance(req_id, int):
            return {"error": "missing or non-integer request id"}
        if op != "logits":
            return {"id": req_id, "error": f"unknown op {op!r}"}
        context = req.get("context")
        if not isinstance(context, list) or not all(
            isinstance(t, int) for t in context
        ):
            return {"id": req_id, "error": "context must be a list of ints"}
        if len(context) > self.config.max_context:
            return {
                "id": req_id,
                "error": f"context length {len(context)} exceeds "
                f"limit {self.config.max_context}",
            }
        if any(not 0 <= t < self.model.vocab_size for t in context):
            return {"id": req_id, "error": "token id out of range"}
        with self._inference_lock:
            try:
                logits = self.model.logits(context)
            except ModelError as exc:
                return {"id": req_id, "error": str(exc)}
        return {"id": req_id, "logits": logits}

    # ----------------------------------------------------------- transports
    def serve_stream(self, rf, wf) -> None:
        """One connection: NDJSON requests in, NDJSON responses out."""
        for line in rf:
            if not line.strip():
                continue
            try:
                req = json.loads(line)
            except json.JSONDecodeError:
                wf.write(json.dumps({"error": "malformed json"}).encode() + b"\n")
                wf.flush()
                return
            if not isinstance(req, dict):
                wf.write(
                    json.dumps({"error": "request is not a JSON object"}).encode()
                    + b"\n"
                )
                wf.flush()
                return
            wf.write(json.dumps(self._answer(req)).encode() + b"\n")
            wf.flush()

    def serve_stdio(self) -> None:
        self.serve_stream(sys.stdin.buffer, sys.stdout.buffer)

    def serve_socket(self, ready_callback=None) -> None:
        host, port = _parse_listen(self.config.listen)
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen()
        bound = listener.getsockname()
        print(f"listening on {bound[0]}:{bound[1]}", flush=True)
        if ready_callback is not None:
            ready_callback(f"{bound[0]}:{bound[1]}")
        while True:
            conn, _addr = listener.accept()
            threading.Thread(
                target=self._handle_conn, args=(conn,), daemon=True
            ).start()

    def _handle_conn(self, conn: socket.socket) -> None:
        rf = conn.makefile("rb")
        wf = conn.makefile("wb")
        try:
            self.serve_stream(rf, wf)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass


def serve(config: BridgeConfig, ready_callback=None) -> None:
    bridge = Bridge(config)
    if config.stdio:
        bridge.serve_stdio()
    else:
        bridge.serve_socket(ready_callback)


def export_vocab(model_id: str, out_path, fp16: bool = False) -> int:
    """Write the model's token list in the vocab file format; returns V."""
    from .vocab import write_vocab_file

    model = load_model(model_id, fp16=fp16)
    write_vocab_file(model.file_tokens(), out_path)
    return model.vocab_size
