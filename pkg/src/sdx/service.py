"""Service assembly: controller + stats poller + metrics and admin endpoints.

One process hosting two roles (control plane and stats collection), each with
its own liveness heartbeat, plus the two HTTP surfaces: the Prometheus-style
/metrics exposition and the JSON admin API.
"""

from __future__ import annotations

import logging
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .api import AdminApi, AdminServer, StagedConfigStore, User, UserStore
from .config import FabricConfig
from .controller import ControllerStatus, Heartbeats, SdxController
from .procinfo import ProcessStats
from .stats import DEFAULT_INTERVAL, SeriesStore, StatsPoller, render_exposition

log = logging.getLogger(__name__)

DEFAULT_CONTROL_PORT = 6653
DEFAULT_ADMIN_PORT = 8080
DEFAULT_METRICS_PORT = 9302
LIVENESS_WINDOW = 5.0


def env_port(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


class MetricsServer:
    """GET /metrics in text exposition format 0.0.4."""

    def __init__(self, service: "SdxService", host: str = "127.0.0.1", port: int = 9302):
        handler = self._make_handler(service)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address
        self._thread: threading.Thread | None = None

    @staticmethod
    def _make_handler(service):
        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                log.debug("metrics: " + fmt, *args)

            def do_GET(self):
                if self.path.split("?")[0] != "/metrics":
                    body = b"not found\n"
                    self.send_response(404)
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                text = render_exposition(service.series_store, service.poller.metas,
                                         service.proc.snapshot()).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/plain; version=0.0.4")
                self.send_header("Content-Length", str(len(text)))
                self.end_headers()
                self.wfile.write(text)

        return Handler

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name="metrics-http", daemon=True)
        self._thread.start()

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


class SdxService:
    def __init__(self, cfg: FabricConfig, users: UserStore | None = None, *,
                 host: str = "127.0.0.1", control_port: int | None = None,
                 admin_port: int | None = None, metrics_port: int | None = None,
                 poll_interval: float = DEFAULT_INTERVAL, ui_dir=None,
                 echo_interval: float = 5.0):
        self.heartbeats = Heartbeats(LIVENESS_WINDOW)
        self.controller = SdxController(
            cfg, host=host,
            port=env_port("SDX_CONTROL_PORT", DEFAULT_CONTROL_PORT)
            if control_port is None else control_port,
            echo_interval=echo_interval, heartbeat=self.heartbeats.beat)
        self.series_store = SeriesStore(resolution_seconds=poll_interval)
        self.poller = StatsPoller(self.controller, self.series_store,
                                  interval=poll_interval,
                                  heartbeat=lambda: self.heartbeats.beat("stats_poller"))
        self.proc = ProcessStats()
        self.config_store = StagedConfigStore(cfg)
        self.users = users or UserStore([User(username="admin", role="admin",
                                              token="admin-token")])
        self._metrics_port = env_port("SDX_METRICS_PORT", DEFAULT_METRICS_PORT) \
            if metrics_port is None else metrics_port
        self._admin_port = env_port("SDX_ADMIN_PORT", DEFAULT_ADMIN_PORT) \
            if admin_port is None else admin_port
        self._host = host
        self._ui_dir = ui_dir
        self.metrics_server: MetricsServer | None = None
        self.admin_server: AdminServer | None = None

    def start(self):
        self.controller.start()
        self.poller.start()
        self.metrics_server = MetricsServer(self, host=self._host, port=self._metrics_port)
        self.metrics_server.start()
        self.admin_server = AdminServer(AdminApi(self), host=self._host,
                                        port=self._admin_port, ui_dir=self._ui_dir)
        self.admin_server.start()
        log.info("service up: control=%s:%d admin=%s:%d metrics=%s:%d",
                 self.controller.host, self.controller.port,
                 self.admin_server.host, self.admin_server.port,
                 self.metrics_server.host, self.metrics_server.port)

    def stop(self):
        if self.admin_server:
            self.admin_server.stop()
        if self.metrics_server:
            self.metrics_server.stop()
        self.poller.stop()
        self.controller.stop()

    def status(self) -> ControllerStatus:
        proc = self.proc.snapshot()
        endpoints = {
            "control": {"host": self.controller.host, "port": self.controller.port,
                        "listening": self.controller.listening},
            "admin": {"host": self.admin_server.host if self.admin_server else self._host,
                      "port": self.admin_server.port if self.admin_server else self._admin_port,
                      "listening": self.admin_server is not None},
            "metrics": {"host": self.metrics_server.host if self.metrics_server else self._host,
                        "port": self.metrics_server.port if self.metrics_server
                        else self._metrics_port,
                        "listening": self.metrics_server is not None},
        }
        return ControllerStatus(
            endpoints=endpoints,
            roles={"controller": self.heartbeats.live("controller"),
                   "stats_poller": self.heartbeats.live("stats_poller")},
            cpu_percent=proc["cpu_percent"],
            resident_memory_bytes=proc["resident_memory_bytes"],
            virtual_memory_bytes=proc["virtual_memory_bytes"],
            sessions=self.controller.session_summaries())
