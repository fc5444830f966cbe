"""Traffic statistics: counter time series, derived rates, and exposition.

Port counters polled from each datapath land in per-series ring buffers
(default 4 h at 15 s resolution). Rates are recomputed on demand from two
samples of the same counter series, with counter resets re-anchoring the
window. Everything is served in Prometheus text exposition format 0.0.4.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

# PortStatsEntry field -> exposition metric name
COUNTER_METRICS = (
    ("rx_bytes", "sdx_port_rx_bytes_total"),
    ("tx_bytes", "sdx_port_tx_bytes_total"),
    ("rx_packets", "sdx_port_rx_packets_total"),
    ("tx_packets", "sdx_port_tx_packets_total"),
    ("rx_dropped", "sdx_port_rx_dropped_total"),
    ("tx_dropped", "sdx_port_tx_dropped_total"),
    ("rx_errors", "sdx_port_rx_errors_total"),
    ("tx_errors", "sdx_port_tx_errors_total"),
)

RATE_METRICS = (
    ("rx_bytes", "sdx_port_bits_in_per_second", 8.0),
    ("tx_bytes", "sdx_port_bits_out_per_second", 8.0),
    ("rx_packets", "sdx_port_packets_in_per_second", 1.0),
    ("tx_packets", "sdx_port_packets_out_per_second", 1.0),
    ("rx_errors", "sdx_port_errors_in_per_second", 1.0),
    ("tx_errors", "sdx_port_errors_out_per_second", 1.0),
    ("rx_dropped", "sdx_port_dropped_in_per_second", 1.0),
    ("tx_dropped", "sdx_port_dropped_out_per_second", 1.0),
)

DEFAULT_INTERVAL = 15.0
DEFAULT_RATE_WINDOW = 60.0


@dataclass(frozen=True)
class SeriesKey:
    name: str
    labels: tuple = ()  # sorted (key, value) pairs


@dataclass(frozen=True)
class RateSample:
    bits_in_per_sec: float
    bits_out_per_sec: float
    pkts_in_per_sec: float
    pkts_out_per_sec: float
    window_seconds: float

    def to_dict(self) -> dict:
        return {
            "bits_in_per_sec": self.bits_in_per_sec,
            "bits_out_per_sec": self.bits_out_per_sec,
            "pkts_in_per_sec": self.pkts_in_per_sec,
            "pkts_out_per_sec": self.pkts_out_per_sec,
            "window_seconds": self.window_seconds,
        }


@dataclass
class ScrapeMeta:
    dp: str
    scrape_duration: float = 0.0
    samples_appended: int = 0
    last_success: bool = False
    last_error: str = ""

    def to_dict(self) -> dict:
        return {"dp": self.dp, "scrape_duration": self.scrape_duration,
                "samples_appended": self.samples_appended,
                "last_success": self.last_success, "last_error": self.last_error}


def series_key(name: str, **labels) -> SeriesKey:
    return SeriesKey(name=name, labels=tuple(sorted((k, str(v)) for k, v in labels.items())))


class SeriesStore:
    """Ring-buffered time series; single writer, snapshot readers."""

    def __init__(self, retention_seconds: float = 4 * 3600, resolution_seconds: float = 15):
        self._maxlen = max(2, int(retention_seconds / resolution_seconds))
        self._series: dict = {}
        self._lock = threading.Lock()
        self.samples_appended = 0
        self.non_monotonic_dropped = 0

    def append(self, key: SeriesKey, ts_ms: int, value: float) -> bool:
        with self._lock:
            dq = self._series.get(key)
            if dq is None:
                dq = deque(maxlen=self._maxlen)
                self._series[key] = dq
            if dq and ts_ms <= dq[-1][0]:
                self.non_monotonic_dropped += 1
                return False
            dq.append((ts_ms, float(value)))
            self.samples_appended += 1
            return True

    def samples(self, key: SeriesKey) -> list:
        with self._lock:
            dq = self._series.get(key)
            return list(dq) if dq else []

    def keys(self) -> list:
        with self._lock:
            return list(self._series.keys())

    def port_labels(self) -> list:
        """Sorted (dp, port) pairs present in any port counter series."""
        out = set()
        for key in self.keys():
            labels = dict(key.labels)
            if key.name.startswith("sdx_port_") and "dp" in labels and "port" in labels:
                out.add((labels["dp"], labels["port"]))
        return sorted(out)


# ---------------------------------------------------------------------------
# Rate derivation

def rate_from_samples(samples, window_seconds: float, now_ms: int) -> float | None:
    """(last - first) / dt over the window; a counter decrease marks a reset
    and re-anchors the window just after it."""
    lo = now_ms - int(window_seconds * 1000)
    within = [s for s in samples if lo <= s[0] <= now_ms]
    if len(within) < 2:
        return None
    anchor = 0
    for i in range(1, len(within)):
        if within[i][1] < within[i - 1][1]:
            anchor = i
    usable = within[anchor:]
    if len(usable) < 2:
        return None
    (t0, v0), (t1, v1) = usable[0], usable[-1]
    if t1 <= t0:
        return None
    return (v1 - v0) / ((t1 - t0) / 1000.0)


def compute_rates(store: SeriesStore, dp: str, port, window_seconds: float = DEFAULT_RATE_WINDOW,
                  now_ms: int | None = None) -> RateSample | None:
    """Derive the four per-port rates; None when any series lacks two samples."""
    if now_ms is None:
        newest = 0
        for field_name, metric in COUNTER_METRICS[:4]:
            s = store.samples(series_key(metric, dp=dp, port=port))
            if s:
                newest = max(newest, s[-1][0])
        if newest == 0:
            return None
        now_ms = newest

    rates = {}
    for field_name, metric in COUNTER_METRICS[:4]:
        samples = store.samples(series_key(metric, dp=dp, port=port))
        r = rate_from_samples(samples, window_seconds, now_ms)
        if r is None:
            return None
        rates[field_name] = r
    return RateSample(bits_in_per_sec=rates["rx_bytes"] * 8.0,
                      bits_out_per_sec=rates["tx_bytes"] * 8.0,
                      pkts_in_per_sec=rates["rx_packets"],
                      pkts_out_per_sec=rates["tx_packets"],
                      window_seconds=window_seconds)


# ---------------------------------------------------------------------------
# Polling

class StatsPoller:
    """Polls PORT_STATS from every steady datapath on a fixed cycle.

    The source must provide steady_datapaths() and
    request_port_stats(dp, timeout) -> list of PortStatsEntry.
    """

    def __init__(self, source, store: SeriesStore, interval: float = DEFAULT_INTERVAL,
                 clock=time.time, heartbeat=None, request_timeout: float = 5.0):
        self.source = source
        self.store = store
        self.interval = interval
        self.clock = clock
        self.heartbeat = heartbeat
        self.request_timeout = request_timeout
        self.metas: dict = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def poll_cycle(self) -> list:
        """One cycle: returns (dp, port, PortStatsEntry, ts_ms) rows appended."""
        rows = []
        for dp in sorted(self.source.steady_datapaths()):
            meta = self.metas.setdefault(dp, ScrapeMeta(dp=dp))
            t0 = time.perf_counter()
            try:
                entries = self.source.request_port_stats(dp, timeout=self.request_timeout)
            except Exception as exc:  # per-target isolation: others unaffected
                meta.scrape_duration = time.perf_counter() - t0
                meta.last_success = False
                meta.last_error = str(exc)
                continue
            ts_ms = int(self.clock() * 1000)
            appended = 0
            for entry in entries:
                for field_name, metric in COUNTER_METRICS:
                    key = series_key(metric, dp=dp, port=entry.port_no)
                    if self.store.append(key, ts_ms, getattr(entry, field_name)):
                        appended += 1
                rows.append((dp, entry.port_no, entry, ts_ms))
            meta.scrape_duration = time.perf_counter() - t0
            meta.samples_appended += appended
            meta.last_success = True
            meta.last_error = ""
        return rows

    # -- background loop ----------------------------------------------------
    def start(self):
        self._thread = threading.Thread(target=self._run, name="stats-poller", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)

    def _run(self):
        next_poll = time.monotonic()
        while not self._stop.is_set():
            if self.heartbeat:
                self.heartbeat()
            now = time.monotonic()
            if now >= next_poll:
                self.poll_cycle()
                next_poll = now + self.interval
            self._stop.wait(0.25)


# ---------------------------------------------------------------------------
# Exposition

_METRIC_TYPES = [
    ("_total", "counter"),
    ("_per_second", "gauge"),
]


def _metric_type(name: str) -> str:
    for suffix, mtype in _METRIC_TYPES:
        if name.endswith(suffix):
            return mtype
    return "gauge"


def _fmt_value(value: float) -> str:
    f = float(value)
    if f == int(f) and abs(f) < 2 ** 53:
        return str(int(f))
    return repr(f)


def _escape_label(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _fmt_labels(labels: tuple) -> str:
    if not labels:
        return ""
    return "{" + ",".join(f'{k}="{_escape_label(str(v))}"' for k, v in labels) + "}"


def render_exposition(store: SeriesStore, metas: dict | None = None,
                      proc: dict | None = None,
                      rate_window: float = DEFAULT_RATE_WINDOW,
                      now_ms: int | None = None) -> str:
    """Prometheus text format 0.0.4; stable ordering, deterministic output."""
    families: dict = {}

    def add(name: str, labels: tuple, value: float):
        families.setdefault(name, []).append((labels, value))

    for key in store.keys():
        samples = store.samples(key)
        if samples:
            add(key.name, key.labels, samples[-1][1])

    counter_names = dict(COUNTER_METRICS)
    for dp, port in store.port_labels():
        labels = (("dp", dp), ("port", port))
        effective_now = now_ms
        if effective_now is None:
            newest = [store.samples(series_key(counter_names[f], dp=dp, port=port))
                      for f, _, _ in RATE_METRICS]
            stamps = [s[-1][0] for s in newest if s]
            if not stamps:
                continue
            effective_now = max(stamps)
        for field_name, metric, scale in RATE_METRICS:
            samples = store.samples(series_key(counter_names[field_name], dp=dp, port=port))
            r = rate_from_samples(samples, rate_window, effective_now)
            if r is not None:
                add(metric, labels, r * scale)

    add("sdx_samples_appended_total", (), store.samples_appended)
    for dp in sorted(metas or {}):
        meta = metas[dp]
        labels = (("dp", dp),)
        add("sdx_scrape_duration_seconds", labels, meta.scrape_duration)
        add("sdx_scrape_samples_appended_total", labels, meta.samples_appended)
        add("sdx_scrape_last_success", labels, 1 if meta.last_success else 0)

    if proc:
        add("process_cpu_percent", (), proc["cpu_percent"])
        add("process_resident_memory_bytes", (), proc["resident_memory_bytes"])
        add("process_virtual_memory_bytes", (), proc["virtual_memory_bytes"])

    lines = []
    for name in sorted(families):
        lines.append(f"# TYPE {name} {_metric_type(name)}")
        for labels, value in sorted(families[name], key=lambda lv: lv[0]):
            lines.append(f"{name}{_fmt_labels(labels)} {_fmt_value(value)}")
    return "\n".join(lines) + "\n"
