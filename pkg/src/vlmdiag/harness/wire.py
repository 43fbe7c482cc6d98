"""Line-delimited JSON request/response transport for external policies and teachers.

Request:  {"id", "prompt_parts": [{"kind": "image"|"text", "data"}], "response_prefix"?, "seed", "max_tokens"}
Response: {"id", "text"} or {"id", "error"}

Endpoints are ``tcp://host:port`` or ``cmd:<shell command>`` (a child process
speaking the protocol on stdin/stdout).
"""

from __future__ import annotations

import itertools
import json
import logging
import shlex
import socket
import socketserver
import subprocess
import threading
from typing import Callable, Optional

from ..errors import ContractViolation, ParameterError, PolicyError, PolicyTimeout, TransportError
from ..taskgen.perception import TaskKind

log = logging.getLogger(__name__)


class _TcpChannel:
    def __init__(self, host: str, port: int, timeout: float):
        self.addr = (host, port)
        self.timeout = timeout
        self.sock: Optional[socket.socket] = None
        self.reader = None

    def exchange(self, line: bytes) -> bytes:
        try:
            if self.sock is None:
                self.sock = socket.create_connection(self.addr, timeout=self.timeout)
                self.reader = self.sock.makefile("rb")
            self.sock.sendall(line)
            reply = self.reader.readline()
        except socket.timeout as exc:
            self.close()
            raise PolicyTimeout(f"no reply from {self.addr[0]}:{self.addr[1]} within {self.timeout}s") from exc
        except OSError as exc:
            self.close()
            raise TransportError(f"{self.addr[0]}:{self.addr[1]}: {exc}") from exc
        if not reply:
            self.close()
            raise TransportError("connection closed by peer")
        return reply

    def close(self):
        if self.sock is not None:
            try:
                self.sock.close()
            finally:
                self.sock = None
                self.reader = None


class _PipeChannel:
    def __init__(self, command: str, timeout: float):
        self.command = command
        self.timeout = timeout
        self.proc: Optional[subprocess.Popen] = None

    def exchange(self, line: bytes) -> bytes:
        if self.proc is None or self.proc.poll() is not None:
            try:
                self.proc = subprocess.Popen(
                    shlex.split(self.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )
            except OSError as exc:
                raise TransportError(f"cannot start {self.command!r}: {exc}") from exc
        result: list[bytes] = []

        def talk():
            try:
                self.proc.stdin.write(line)
                self.proc.stdin.flush()
                result.append(self.proc.stdout.readline())
            except OSError:
                pass

        t = threading.Thread(target=talk, daemon=True)
        t.start()
        t.join(self.timeout)
        if t.is_alive():
            self.close()
            raise PolicyTimeout(f"{self.command!r} did not answer within {self.timeout}s")
        if not result or not result[0]:
            self.close()
            raise TransportError(f"{self.command!r} closed its output")
        return result[0]

    def close(self):
        if self.proc is not None:
            self.proc.kill()
            self.proc.wait()
            self.proc = None


def _channel(endpoint: str, timeout: float):
    if endpoint.startswith("tcp://"):
        host, _, port = endpoint[len("tcp://"):].rpartition(":")
        if not host or not port.isdigit():
            raise ParameterError(f"bad tcp endpoint {endpoint!r}")
        return _TcpChannel(host, int(port), timeout)
    if endpoint.startswith("cmd:"):
        return _PipeChannel(endpoint[len("cmd:"):], timeout)
    raise ParameterError(f"unsupported endpoint {endpoint!r} (use tcp://host:port or cmd:...)")


class ExternalPolicyClient:
    """Policy implementation that forwards generate() calls over the wire.

    Transport failures are retried ``retries`` times on a fresh connection
    before surfacing as TransportError/PolicyTimeout.
    """

    deterministic = False

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 2, max_tokens: int = 4096):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.max_tokens = max_tokens
        self.tag = f"endpoint({endpoint})"
        self._channel = _channel(endpoint, timeout)
        self._ids = itertools.count()
        self._lock = threading.Lock()

    def request(self, prompt_parts, response_prefix: Optional[str], seed: int) -> str:
        with self._lock:
            rid = f"req-{next(self._ids)}"
            payload = {"id": rid, "prompt_parts": list(prompt_parts), "seed": int(seed), "max_tokens": self.max_tokens}
            if response_prefix is not None:
                payload["response_prefix"] = response_prefix
            line = (json.dumps(payload) + "\n").encode()
            for attempt in range(self.retries + 1):
                try:
                    reply = self._channel.exchange(line)
                    break
                except TransportError:
                    if attempt == self.retries:
                        raise
                    log.warning("transport failure on %s, retrying (%d/%d)", self.endpoint, attempt + 1, self.retries)
        try:
            msg = json.loads(reply)
        except ValueError as exc:
            raise ContractViolation(f"reply is not JSON: {reply[:80]!r}") from exc
        if not isinstance(msg, dict) or msg.get("id") != rid:
            raise ContractViolation(f"reply id {msg.get('id') if isinstance(msg, dict) else None!r} does not match {rid!r}")
        if "error" in msg:
            raise PolicyError(f"endpoint error: {msg['error']}")
        if not isinstance(msg.get("text"), str):
            raise ContractViolation("reply carries neither text nor error")
        return msg["text"]

    def generate(self, prompt_parts, response_prefix: Optional[str], seed: int) -> str:
        text = self.request(prompt_parts, response_prefix, seed)
        if response_prefix is not None and not text.startswith(response_prefix):
            raise ContractViolation("response does not start with the requested prefix")
        return text

    def close(self):
        self._channel.close()


class WireTeacher:
    """Teacher client over the same protocol: the reply text is the transcription."""

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 2):
        self.client = ExternalPolicyClient(endpoint, timeout, retries)

    def perceive(self, image: str, task_kind: TaskKind, instruction: str, seed: int) -> str:
        parts = [{"kind": "image", "data": image}, {"kind": "text", "data": instruction}]
        return self.client.request(parts, None, seed)


def external_policy_client(endpoint: str, timeout: float = 60.0, retries: int = 2) -> ExternalPolicyClient:
    return ExternalPolicyClient(endpoint, timeout, retries)


def handle_request(generate: Callable, line: bytes) -> bytes:
    """Answer one request line with ``generate(parts, prefix, seed)``."""
    try:
        req = json.loads(line)
        rid = req.get("id")
    except ValueError:
        return (json.dumps({"id": None, "error": "malformed request"}) + "\n").encode()
    try:
        text = generate(req["prompt_parts"], req.get("response_prefix"), int(req.get("seed", 0)))
        reply = {"id": rid, "text": text}
    except Exception as exc:  # reported to the client, not raised in the server
        reply = {"id": rid, "error": f"{type(exc).__name__}: {exc}"}
    return (json.dumps(reply) + "\n").encode()


def serve(generate: Callable, host: str = "127.0.0.1", port: int = 0) -> socketserver.ThreadingTCPServer:
    """Start a background TCP server around a generate callable; returns the server.

    ``server.server_address`` holds the bound port; call ``shutdown()`` to stop.
    """

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for line in self.rfile:
                if line.strip():
                    self.wfile.write(handle_request(generate, line))
                    self.wfile.flush()

    server = socketserver.ThreadingTCPServer((host, port), Handler)
    server.daemon_threads = True
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server
