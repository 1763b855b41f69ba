"""Local JSON-over-HTTP inference service.

Two endpoints on a loopback-bound threading HTTP server:

  GET  /v1/health    -> {"status", "model_hashes", "version"}
  POST /v1/analyze   -> {"diagnostics": [...], "warnings": [...]}

The analyze body is either {"functions": [{"id", "code"}, ...]} for
pre-extracted functions or {"file_text": "...", "file": "name"} for whole
files.  Responses are serialized with sorted keys and fixed separators, so
identical requests against the same models produce byte-identical bodies.
Status 422 signals that at least one function was analyzed truncated; the
body still carries the full results.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import __version__
from .engine import AnalysisResult, Engine

log = logging.getLogger(__name__)


class ServiceError(ValueError):
    pass


def _body_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server_version = f"vulnhunter/{__version__}"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # stderr chatter off; use logging
        log.debug("%s - %s", self.address_string(), fmt % args)

    # -- helpers ----------------------------------------------------------

    def _send(self, status: int, payload: dict) -> None:
        body = _body_bytes(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _engine(self) -> Engine | None:
        return self.server.engine  # type: ignore[attr-defined]

    # -- endpoints ---------------------------------------------------------

    def do_GET(self):  # noqa: N802 (http.server API)
        if self.path != "/v1/health":
            self._send(404, {"error": {"message": f"unknown path {self.path}"}})
            return
        engine = self._engine()
        if engine is None:
            self._send(503, {"status": "loading", "version": __version__})
            return
        self._send(200, {
            "status": "ok",
            "model_hashes": engine.model_hashes(),
            "version": __version__,
        })

    def do_POST(self):  # noqa: N802
        if self.path != "/v1/analyze":
            self._send(404, {"error": {"message": f"unknown path {self.path}"}})
            return
        engine = self._engine()
        if engine is None:
            self._send(503, {"error": {"message": "models not loaded"}})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            body = json.loads(raw.decode("utf-8"))
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
        except (ValueError, UnicodeDecodeError) as e:
            self._send(400, {"error": {"message": f"malformed request body: {e}"}})
            return

        try:
            result = _run_analysis(engine, body)
        except ServiceError as e:
            self._send(400, {"error": {"message": str(e)}})
            return

        payload = {
            "diagnostics": [d.to_json() for d in result.diagnostics],
            "warnings": result.warnings,
        }
        truncated = any(d.truncated for d in result.diagnostics) or any(
            "truncated" in w for w in result.warnings
        )
        self._send(422 if truncated else 200, payload)


def _run_analysis(engine: Engine, body: dict) -> AnalysisResult:
    if "functions" in body:
        functions = body["functions"]
        if not isinstance(functions, list):
            raise ServiceError("'functions' must be an array")
        pairs = []
        for i, f in enumerate(functions):
            if not isinstance(f, dict) or "id" not in f or "code" not in f:
                raise ServiceError(f"functions[{i}] needs 'id' and 'code'")
            if not isinstance(f["code"], str):
                raise ServiceError(f"functions[{i}].code must be a string")
            pairs.append((str(f["id"]), f["code"]))
        return engine.analyze_functions(pairs)
    if "file_text" in body:
        if not isinstance(body["file_text"], str):
            raise ServiceError("'file_text' must be a string")
        return engine.analyze_source(body["file_text"], file=str(body.get("file", "<request>")))
    raise ServiceError("body needs either 'functions' or 'file_text'")


class AnalysisServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, engine: Engine | None):
        super().__init__(address, _Handler)
        self.engine = engine


def make_server(engine: Engine | None, host: str = "127.0.0.1", port: int = 0) -> AnalysisServer:
    """Create (but do not start) the server; port 0 picks an ephemeral port."""
    return AnalysisServer((host, port), engine)


def start_background(engine: Engine | None, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns (server, thread)."""
    server = make_server(engine, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


def serve_forever(engine: Engine, host: str = "127.0.0.1", port: int = 8725) -> None:
    """Blocking serve loop with clean shutdown on KeyboardInterrupt."""
    server = make_server(engine, host, port)
    log.info("listening on http://%s:%d", *server.server_address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
