"""Mock HTTP device servers standing in for the remote robots and
televisions. Scriptable latency and failure injection; every received
command is recorded for assertions."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

ROBOT = "robot"
TELEVISION = "television"


@dataclass
class MockConfig:
    name: str
    kind: str  # ROBOT | TELEVISION
    media: list[str] = field(default_factory=list)
    demos: list[str] = field(default_factory=list)
    items: list[str] = field(default_factory=list)
    latency: float = 0.0  # seconds added to every response
    fail_all: bool = False  # respond 500 to everything

    def __post_init__(self):
        if self.kind not in (ROBOT, TELEVISION):
            raise ValueError(f"unknown device kind {self.kind!r}")


class MockDeviceServer:
    """One HTTP device. Records commands as (name, verb, argument) tuples."""

    def __init__(self, config: MockConfig, shared_log: list | None = None, port: int = 0):
        self.config = config
        self.commands: list[tuple[str, str, str]] = []
        self.shared_log = shared_log if shared_log is not None else []
        self.playing: str | None = None
        self.running_demo: str | None = None
        self.picked: list[str] = []
        self._lock = threading.Lock()
        mock = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _reply(self, code: int, payload: dict):
                if mock.config.latency > 0:
                    time.sleep(mock.config.latency)
                body = json.dumps(payload, separators=(",", ":")).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _record(self, verb: str, arg: str = ""):
                with mock._lock:
                    entry = (mock.config.name, verb, arg)
                    mock.commands.append(entry)
                    mock.shared_log.append(entry)

            def do_GET(self):
                if mock.config.fail_all:
                    return self._reply(500, {"error": "injected failure"})
                if self.path == "/health":
                    self._record("health")
                    return self._reply(200, {"status": "ok"})
                if self.path == "/media" and mock.config.kind == TELEVISION:
                    self._record("list_media")
                    return self._reply(200, {"media": mock.config.media})
                return self._reply(404, {"error": "not found"})

            def do_POST(self):
                if mock.config.fail_all:
                    return self._reply(500, {"error": "injected failure"})
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    body = json.loads(raw or b"{}")
                except json.JSONDecodeError:
                    return self._reply(400, {"error": "malformed body"})
                kind = mock.config.kind
                if self.path == "/media/play" and kind == TELEVISION:
                    media_id = body.get("id")
                    if media_id not in mock.config.media:
                        return self._reply(404, {"error": f"unknown media {media_id!r}"})
                    mock.playing = media_id
                    self._record("play", media_id)
                    return self._reply(200, {"ok": True})
                if self.path == "/media/stop" and kind == TELEVISION:
                    mock.playing = None
                    self._record("stop")
                    return self._reply(200, {"ok": True})
                if self.path == "/demo/start" and kind == ROBOT:
                    demo_id = body.get("id")
                    if demo_id not in mock.config.demos:
                        return self._reply(404, {"error": f"unknown demo {demo_id!r}"})
                    mock.running_demo = demo_id
                    self._record("start_demo", demo_id)
                    return self._reply(200, {"ok": True})
                if self.path == "/demo/stop" and kind == ROBOT:
                    mock.running_demo = None
                    self._record("stop_demo")
                    return self._reply(200, {"ok": True})
                if self.path == "/pick" and kind == ROBOT:
                    item = body.get("item")
                    if mock.config.items and item not in mock.config.items:
                        return self._reply(404, {"error": f"unknown item {item!r}"})
                    mock.picked.append(item)
                    self._record("pick", item)
                    return self._reply(200, {"ok": True})
                return self._reply(404, {"error": "not found"})

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "MockDeviceServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
