import json
import socket
import subprocess
import sys
import threading

import pytest

from modelbridge import Bridge, BridgeConfig, StubModel, VocabError, export_vocab
from modelbridge.vocab import fingerprint, read_vocab_file, shared_tokens


def start_bridge(model="stub:12", max_context=32):
    config = BridgeConfig(model=model, listen="127.0.0.1:0", max_context=max_context)
    bridge = Bridge(config)
    ready = threading.Event()
    box = {}

    def on_ready(address):
        box["address"] = address
        ready.set()

    threading.Thread(
        target=bridge.serve_socket, args=(on_ready,), daemon=True
    ).start()
    assert ready.wait(5)
    host, port = box["address"].rsplit(":", 1)
    return bridge, host, int(port)


class Client:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port), timeout=5)
        self.rf = self.sock.makefile("rb")
        self.wf = self.sock.makefile("wb")

    def send(self, obj):
        self.wf.write(json.dumps(obj).encode() + b"\n")
        self.wf.flush()
        return json.loads(self.rf.readline())

    def raw(self, data: bytes):
        self.wf.write(data)
        self.wf.flush()
        return self.rf.readline()

    def close(self):
        self.sock.close()


def test_hello_contract():
    bridge, host, port = start_bridge()
    client = Client(host, port)
    hello = client.send({"op": "hello"})
    assert hello["vocab_size"] == 12
    assert len(hello["fingerprint"]) == 16
    bytes.fromhex(hello["fingerprint"])
    assert hello["name"].startswith("stub")
    client.close()


def test_logits_response_matches_request_id():
    bridge, host, port = start_bridge()
    client = Client(host, port)
    for req_id in (0, 7, 123456789):
        resp = client.send({"id": req_id, "op": "logits", "context": [2, 3]})
        assert resp["id"] == req_id
        assert len(resp["logits"]) == 12
    client.close()


def test_context_over_limit_error_keeps_connection():
    bridge, host, port = start_bridge(max_context=4)
    client = Client(host, port)
    resp = client.send({"id": 1, "op": "logits", "context": [2] * 5})
    assert resp["id"] == 1
    assert "limit" in resp["error"]
    resp = client.send({"id": 2, "op": "logits", "context": [2]})
    assert resp["logits"]
    client.close()


def test_out_of_range_token_rejected():
    bridge, host, port = start_bridge()
    client = Client(host, port)
    resp = client.send({"id": 3, "op": "logits", "context": [99]})
    assert "error" in resp
    client.close()


def test_malformed_json_errors_and_closes():
    bridge, host, port = start_bridge()
    client = Client(host, port)
    line = client.raw(b"{broken\n")
    assert b"error" in line
    assert client.rf.readline() == b""
    client.close()


def test_missing_id_is_an_error():
    bridge, host, port = start_bridge()
    client = Client(host, port)
    resp = client.send({"op": "logits", "context": [2]})
    assert "error" in resp
    client.close()


def test_concurrent_connections_multiplex():
    bridge, host, port = start_bridge()
    clients = [Client(host, port) for _ in range(4)]
    for i, client in enumerate(clients):
        resp = client.send({"id": i, "op": "logits", "context": [2]})
        assert resp["id"] == i
    for client in clients:
        client.close()


def test_stub_from_vocab_file(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("alpha\nbeta\ngamma\n", encoding="utf-8")
    model = StubModel(str(path))
    assert model.vocab_size == 5
    assert model.file_tokens() == ["alpha", "beta", "gamma"]
    expected = fingerprint(shared_tokens(["alpha", "beta", "gamma"]))
    assert model.fingerprint_hex() == expected.hex()


def test_vocab_file_validation(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("a\na\n", encoding="utf-8")
    with pytest.raises(VocabError, match="duplicate"):
        read_vocab_file(path)


def test_export_vocab_reexport_identical(tmp_path):
    out1 = tmp_path / "one.txt"
    out2 = tmp_path / "two.txt"
    assert export_vocab("stub:9", out1) == 9
    assert export_vocab("stub:9", out2) == 9
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text(encoding="utf-8").splitlines()) == 9 - 2


def test_stdio_mode_subprocess():
    proc = subprocess.Popen(
        [sys.executable, "-m", "modelbridge.cli", "serve", "--model", "stub:6",
         "--stdio"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
    )
    try:
        proc.stdin.write(b'{"op": "hello"}\n')
        proc.stdin.flush()
        hello = json.loads(proc.stdout.readline())
        assert hello["vocab_size"] == 6
        proc.stdin.write(b'{"id": 5, "op": "logits", "context": [2, 3]}\n')
        proc.stdin.flush()
        resp = json.loads(proc.stdout.readline())
        assert resp["id"] == 5
        assert resp["logits"] == [0.0] * 6
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)
