"""Deterministic simulated OpenFlow switch fabric.

Stands in for the physical/OVS fabric: switches speak real OF 1.3 over TCP to
the controller, while hosts and traffic flows are declarative. Frames are
metadata only (header tuple plus size), batched per 100 ms virtual tick, so
gigabit-regime figures become exact counter arithmetic. Matching is highest
priority first, ties broken by earlier insertion; pipeline semantics are the
rule compiler's contract (ACL table 0, VLAN table 1, L2 table 2).
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
import time
from dataclasses import dataclass, field

from . import ofproto as of
from . import yamlio
from .compiler import FlowEntry, flowmod_to_entry, _entry_sort_key
from .yamlio import Mapping, Scalar, Sequence, YamlSourceError

log = logging.getLogger(__name__)

DEFAULT_TICK = 0.1
MIN_FRAME, MAX_FRAME = 64, 9000
BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"


class TopologyError(Exception):
    pass


class SimError(Exception):
    pass


@dataclass(frozen=True)
class SwitchSpec:
    name: str
    dp_id: int
    ports: tuple


@dataclass(frozen=True)
class HostSpec:
    name: str
    switch: str
    port: int
    mac: str
    vlan: str = ""


@dataclass(frozen=True)
class FlowSpec:
    src: str
    dst: str
    pps: float
    bytes_per_packet: int
    eth_type: int
    ip_proto: int | None = None
    start: float = 0.0
    stop: float | None = None

    def active(self, t: float) -> bool:
        return t >= self.start and (self.stop is None or t < self.stop)


@dataclass(frozen=True)
class TopologySpec:
    switches: dict
    hosts: dict
    flows: tuple


def _want(node, cls, what):
    if not isinstance(node, cls):
        raise TopologyError(f"{what} has wrong type")
    return node


def _tint(node, what) -> int:
    raw = _want(node, Scalar, what).raw.strip()
    try:
        return int(raw, 16) if raw.lower().startswith("0x") else int(raw)
    except ValueError as exc:
        raise TopologyError(f"{what} must be an integer, got {raw!r}") from exc


def _tfloat(node, what) -> float:
    raw = _want(node, Scalar, what).raw.strip()
    try:
        return float(raw)
    except ValueError as exc:
        raise TopologyError(f"{what} must be a number, got {raw!r}") from exc


def _tstr(node, what) -> str:
    return _want(node, Scalar, what).raw


def parse_topology(text) -> TopologySpec:
    try:
        root = yamlio.load_document(text)
    except YamlSourceError as exc:
        raise TopologyError(str(exc)) from exc
    top = _want(root, Mapping, "document")
    for key in top.keys():
        if key not in ("switches", "hosts", "flows"):
            raise TopologyError(f"unknown key: {key}")
    if top.get("switches") is None:
        raise TopologyError("missing section: switches")

    switches = {}
    for key, node in _want(top.get("switches"), Mapping, "switches").pairs:
        m = _want(node, Mapping, f"switches.{key.raw}")
        for k in m.keys():
            if k not in ("dp_id", "ports"):
                raise TopologyError(f"unknown key in switches.{key.raw}: {k}")
        ports = tuple(_tint(p, "port") for p in
                      _want(m.get("ports"), Sequence, f"switches.{key.raw}.ports").items)
        switches[key.raw] = SwitchSpec(name=key.raw, dp_id=_tint(m.get("dp_id"), "dp_id"),
                                       ports=ports)

    hosts = {}
    if top.get("hosts") is not None:
        for key, node in _want(top.get("hosts"), Mapping, "hosts").pairs:
            m = _want(node, Mapping, f"hosts.{key.raw}")
            for k in m.keys():
                if k not in ("switch", "port", "mac", "vlan"):
                    raise TopologyError(f"unknown key in hosts.{key.raw}: {k}")
            hosts[key.raw] = HostSpec(
                name=key.raw, switch=_tstr(m.get("switch"), "switch"),
                port=_tint(m.get("port"), "port"), mac=_tstr(m.get("mac"), "mac").lower(),
                vlan=_tstr(m.get("vlan"), "vlan") if m.get("vlan") is not None else "")

    flows = []
    if top.get("flows") is not None:
        for i, node in enumerate(_want(top.get("flows"), Sequence, "flows").items):
            m = _want(node, Mapping, f"flows[{i}]")
            for k in m.keys():
                if k not in ("src", "dst", "pps", "bytes_per_packet", "eth_type",
                             "ip_proto", "start", "stop"):
                    raise TopologyError(f"unknown key in flows[{i}]: {k}")
            flows.append(FlowSpec(
                src=_tstr(m.get("src"), "src"), dst=_tstr(m.get("dst"), "dst"),
                pps=_tfloat(m.get("pps"), "pps"),
                bytes_per_packet=_tint(m.get("bytes_per_packet"), "bytes_per_packet"),
                eth_type=_tint(m.get("eth_type"), "eth_type"),
                ip_proto=_tint(m.get("ip_proto"), "ip_proto") if m.get("ip_proto") is not None else None,
                start=_tfloat(m.get("start"), "start") if m.get("start") is not None else 0.0,
                stop=_tfloat(m.get("stop"), "stop") if m.get("stop") is not None else None))

    spec = TopologySpec(switches=switches, hosts=hosts, flows=tuple(flows))
    validate_topology(spec)
    return spec


def validate_topology(spec: TopologySpec) -> None:
    dpids = [s.dp_id for s in spec.switches.values()]
    if len(set(dpids)) != len(dpids):
        raise TopologyError("duplicate dp_id")
    for host in spec.hosts.values():
        if host.switch not in spec.switches:
            raise TopologyError(f"host {host.name} attaches to unknown switch {host.switch}")
        if host.port not in spec.switches[host.switch].ports:
            raise TopologyError(f"host {host.name} attaches to unknown port "
                                f"{host.port} on {host.switch}")
    macs = [h.mac for h in spec.hosts.values()]
    if len(set(macs)) != len(macs):
        raise TopologyError("duplicate host MAC")
    for i, flow in enumerate(spec.flows):
        for end in (flow.src, flow.dst):
            if end not in spec.hosts:
                raise TopologyError(f"flows[{i}] references unknown host {end}")
        if spec.hosts[flow.src].switch != spec.hosts[flow.dst].switch:
            raise TopologyError(f"flows[{i}] crosses switches (no inter-switch links)")
        if flow.pps <= 0:
            raise TopologyError(f"flows[{i}]: pps must be positive")
        if not MIN_FRAME <= flow.bytes_per_packet <= MAX_FRAME:
            raise TopologyError(f"flows[{i}]: bytes_per_packet outside [{MIN_FRAME}, {MAX_FRAME}]")


# ---------------------------------------------------------------------------
# Runtime pieces

@dataclass(frozen=True)
class Frame:
    src_mac: str
    dst_mac: str
    eth_type: int
    ip_proto: int | None
    size: int


@dataclass
class _SimEntry:
    entry: FlowEntry
    order: int
    idle_timeout: int = 0
    last_hit: float = 0.0


@dataclass
class _PendingBatch:
    frame: Frame
    count: int
    in_port: int
    event: threading.Event = field(default_factory=threading.Event)
    outputs: tuple = ()


class _Counters:
    __slots__ = ("rx_packets", "tx_packets", "rx_bytes", "tx_bytes",
                 "rx_dropped", "tx_dropped", "rx_errors", "tx_errors")

    def __init__(self):
        for name in self.__slots__:
            setattr(self, name, 0)


class SimSwitch:
    """One simulated datapath: a TCP client session plus flow tables."""

    def __init__(self, spec: SwitchSpec, fabric: "SimFabric"):
        self.spec = spec
        self.fabric = fabric
        self.tables: dict = {0: [], 1: [], 2: []}
        self.counters = {p: _Counters() for p in spec.ports}
        self.buffers: dict = {}
        self.flowmods_received = 0
        self.started_at = 0.0
        self.ready = threading.Event()
        self.connected = False
        self._sock: socket.socket | None = None
        self._send_lock = threading.Lock()
        self._order = itertools.count()
        self._xids = itertools.count(1)
        self._tokens = itertools.count(1)
        self._thread: threading.Thread | None = None

    # -- session ---------------------------------------------------------------
    def connect(self, host: str, port: int) -> None:
        self._sock = socket.create_connection((host, port), timeout=5)
        self._sock.settimeout(0.25)
        self.connected = True
        self._thread = threading.Thread(target=self._session_loop,
                                        name=f"sim-{self.spec.name}", daemon=True)
        self._thread.start()

    def close(self) -> None:
        self.connected = False
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._thread:
            self._thread.join(timeout=5)

    def _send(self, msg) -> None:
        with self._send_lock:
            self._sock.sendall(of.encode(msg))

    def _session_loop(self) -> None:
        frames = of.FrameBuffer()
        while self.connected and not self.fabric.stopped:
            try:
                data = self._sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            try:
                chunks = frames.feed(data)
            except of.FramingError:
                break
            for chunk in chunks:
                try:
                    msg = of.decode(chunk)
                except of.OfDecodeError as exc:
                    log.info("sim %s skipping undecodable frame: %s", self.spec.name, exc)
                    continue
                try:
                    self._handle(msg)
                except OSError:
                    break
        self.connected = False

    def _handle(self, msg) -> None:
        if isinstance(msg, of.Hello):
            self._send(of.Hello(xid=next(self._xids), versions=(of.OFP_VERSION,)))
        elif isinstance(msg, of.FeaturesRequest):
            self._send(of.FeaturesReply(xid=msg.xid, dp_id=self.spec.dp_id,
                                        n_buffers=256, n_tables=3))
        elif isinstance(msg, of.FlowMod):
            with self.fabric.lock:
                self.flowmods_received += 1
                self._apply_flow_mod(msg)
        elif isinstance(msg, of.BarrierRequest):
            self._send(of.BarrierReply(xid=msg.xid))
            self.ready.set()
        elif isinstance(msg, of.EchoRequest):
            self._send(of.EchoReply(xid=msg.xid, data=msg.data))
        elif isinstance(msg, of.PortStatsRequest):
            with self.fabric.lock:
                entries = self._port_stats_locked()
            self._send(of.PortStatsReply(xid=msg.xid, entries=tuple(entries)))
        elif isinstance(msg, of.PacketOut):
            self._handle_packet_out(msg)
        elif isinstance(msg, of.DescRequest):
            self._send(of.DescReply(xid=msg.xid, mfr_desc="sdx", hw_desc="sim-fabric",
                                    sw_desc="0.1", dp_desc=self.spec.name))

    def _handle_packet_out(self, msg: of.PacketOut) -> None:
        ports: list = []
        for act in msg.actions:
            if act.port == of.OFPP_FLOOD:
                ports.extend(p for p in self.spec.ports if p != msg.in_port)
            elif act.port < 0xFFFFFF00:
                ports.append(act.port)
        if msg.buffer_id == of.OFP_NO_BUFFER:
            return  # nothing buffered; metadata frames always travel buffered
        with self.fabric.lock:
            pending = self.buffers.pop(msg.buffer_id, None)
        if pending is not None:
            pending.outputs = tuple(ports)
            pending.event.set()

    # -- flow table ---------------------------------------------------------------
    def _apply_flow_mod(self, fm: of.FlowMod) -> None:
        if fm.command == of.OFPFC_ADD:
            entry = flowmod_to_entry(fm)
            table = self.tables[entry.table_id]
            for i, se in enumerate(table):
                if se.entry.key == entry.key:
                    table[i] = _SimEntry(entry=entry, order=next(self._order),
                                         idle_timeout=fm.idle_timeout,
                                         last_hit=self.fabric.virtual_now)
                    return
            table.append(_SimEntry(entry=entry, order=next(self._order),
                                   idle_timeout=fm.idle_timeout,
                                   last_hit=self.fabric.virtual_now))
            return
        if fm.command in (of.OFPFC_DELETE, of.OFPFC_DELETE_STRICT):
            strict = fm.command == of.OFPFC_DELETE_STRICT
            tables = list(self.tables) if fm.table_id == of.OFPTT_ALL else [fm.table_id]
            fm_match = fm.match.to_dict()
            for tid in tables:
                if tid not in self.tables:
                    continue
                kept = []
                for se in self.tables[tid]:
                    if self._delete_hits(se, fm, fm_match, strict, tid):
                        continue
                    kept.append(se)
                self.tables[tid] = kept
            return
        log.info("sim %s ignoring unsupported flow-mod command %d", self.spec.name, fm.command)

    @staticmethod
    def _delete_hits(se: _SimEntry, fm: of.FlowMod, fm_match: dict, strict: bool,
                     tid: int) -> bool:
        if fm.cookie_mask and (se.entry.cookie & fm.cookie_mask) != (fm.cookie & fm.cookie_mask):
            return False
        entry_match = dict(se.entry.match)
        if strict:
            return se.entry.priority == fm.priority and entry_match == fm_match
        # non-strict: delete entries at least as specific as the given match
        return all(entry_match.get(k) == v for k, v in fm_match.items())

    def _lookup(self, table_id: int, in_port: int, frame: Frame) -> _SimEntry | None:
        now = self.fabric.virtual_now
        table = self.tables[table_id]
        live = []
        for se in table:
            if se.idle_timeout and now - se.last_hit > se.idle_timeout:
                continue  # expired; swept separately
            live.append(se)
        best = None
        for se in live:
            if not _entry_matches(se.entry, in_port, frame):
                continue
            if best is None or (se.entry.priority, -se.order) > (best.entry.priority, -best.order):
                best = se
        return best

    def sweep_expired(self) -> None:
        now = self.fabric.virtual_now
        for tid, table in self.tables.items():
            self.tables[tid] = [se for se in table
                                if not (se.idle_timeout and now - se.last_hit > se.idle_timeout)]

    def _port_stats_locked(self) -> list:
        out = []
        for port in sorted(self.counters):
            c = self.counters[port]
            out.append(of.PortStatsEntry(
                port_no=port, rx_packets=c.rx_packets, tx_packets=c.tx_packets,
                rx_bytes=c.rx_bytes, tx_bytes=c.tx_bytes, rx_dropped=c.rx_dropped,
                tx_dropped=c.tx_dropped, rx_errors=c.rx_errors, tx_errors=c.tx_errors,
                duration_sec=int(self.fabric.virtual_now - self.started_at)))
        return out

    def flow_entries(self) -> tuple:
        with self.fabric.lock:
            entries = [se.entry for table in self.tables.values() for se in table]
        return tuple(sorted(entries, key=_entry_sort_key))


def _entry_matches(entry: FlowEntry, in_port: int, frame: Frame) -> bool:
    for field_name, value in entry.match:
        if field_name == "in_port":
            if value != in_port:
                return False
        elif field_name == "eth_type":
            if value != frame.eth_type:
                return False
        elif field_name == "ip_proto":
            if frame.ip_proto is None or value != frame.ip_proto:
                return False
        elif field_name == "eth_dst":
            if value != frame.dst_mac:
                return False
        elif field_name == "eth_src":
            if value != frame.src_mac:
                return False
        else:
            return False  # untagged frames: vlan_vid (or unknown) never matches
    return True


# ---------------------------------------------------------------------------
# Ledger

class HostLedger:
    """Per-host conservation accounting for every generated frame."""

    def __init__(self, hosts):
        self.sent = {h: 0 for h in hosts}
        self.received = {h: 0 for h in hosts}  # frames addressed to the host
        self.seen = {h: 0 for h in hosts}  # all frames arriving at the host port
        self.received_hist = {h: {} for h in hosts}
        self.delivered = 0
        self.diverted = 0
        self.dropped = 0
        self.extra_copies = 0
        self.total_sent = 0

    def conservation_ok(self) -> bool:
        return self.total_sent == self.delivered + self.diverted + self.dropped

    def to_dict(self) -> dict:
        return {"sent": dict(self.sent), "received": dict(self.received),
                "seen": dict(self.seen),
                "received_hist": {h: {f"{et:#x}/{proto}": n
                                      for (et, proto), n in hist.items()}
                                  for h, hist in self.received_hist.items()},
                "delivered": self.delivered, "diverted": self.diverted,
                "dropped": self.dropped, "extra_copies": self.extra_copies,
                "total_sent": self.total_sent}


# ---------------------------------------------------------------------------
# Fabric

class SimFabric:
    def __init__(self, spec: TopologySpec, controller_host: str, controller_port: int,
                 tick: float = DEFAULT_TICK):
        validate_topology(spec)
        self.spec = spec
        self.controller_endpoint = (controller_host, controller_port)
        self.tick = tick
        self.lock = threading.Lock()
        self.virtual_now = 0.0
        self.stopped = False
        self.switches = {name: SimSwitch(sw, self) for name, sw in spec.switches.items()}
        self.ledger = HostLedger(spec.hosts)
        self._host_at = {(h.switch, h.port): h for h in spec.hosts.values()}
        self._flow_state = [{"elapsed": 0.0, "emitted": 0} for _ in spec.flows]
        self.controller_timeouts = 0

    # -- lifecycle -------------------------------------------------------------
    def start(self, timeout: float = 10.0) -> None:
        for sw in self.switches.values():
            sw.connect(*self.controller_endpoint)
        self.wait_ready(timeout)

    def wait_ready(self, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        for sw in self.switches.values():
            remaining = deadline - time.monotonic()
            if remaining <= 0 or not sw.ready.wait(remaining):
                raise SimError(f"switch {sw.spec.name} never finished table sync")

    def stop(self) -> None:
        self.stopped = True
        for sw in self.switches.values():
            sw.close()

    # -- introspection -----------------------------------------------------------
    def _switch(self, dp) -> SimSwitch:
        if dp in self.switches:
            sw = self.switches[dp]
        else:
            matches = [s for s in self.switches.values() if s.spec.dp_id == dp]
            if not matches:
                raise SimError(f"no session for datapath {dp!r}")
            sw = matches[0]
        if not sw.connected:
            raise SimError(f"no session for datapath {dp!r}")
        return sw

    def read_flow_table(self, dp) -> tuple:
        return self._switch(dp).flow_entries()

    def port_counters(self, dp) -> dict:
        sw = self._switch(dp)
        with self.lock:
            return {e.port_no: e for e in sw._port_stats_locked()}

    def flowmods_received(self, dp) -> int:
        with self.lock:
            return self._switch(dp).flowmods_received

    # -- traffic -------------------------------------------------------------------
    def advance(self, duration: float) -> dict:
        """Advance the virtual clock, emitting floor(pps x active time) frames
        per flow, batched per tick. Returns an event summary dict."""
        start_totals = (self.ledger.total_sent, self.ledger.delivered,
                        self.ledger.diverted, self.ledger.dropped)
        ticks = max(1, round(duration / self.tick))
        dt = duration / ticks
        for _ in range(ticks):
            for idx, flow in enumerate(self.spec.flows):
                if not flow.active(self.virtual_now):
                    continue
                state = self._flow_state[idx]
                state["elapsed"] += dt
                due = int(flow.pps * state["elapsed"] + 1e-9) - state["emitted"]
                if due <= 0:
                    continue
                state["emitted"] += due
                src = self.spec.hosts[flow.src]
                dst = self.spec.hosts[flow.dst]
                frame = Frame(src_mac=src.mac, dst_mac=dst.mac, eth_type=flow.eth_type,
                              ip_proto=flow.ip_proto, size=flow.bytes_per_packet)
                self._inject(self.switches[src.switch], src.port, frame, due, flow.src)
            self.virtual_now += dt
            with self.lock:
                for sw in self.switches.values():
                    sw.sweep_expired()
        end_totals = (self.ledger.total_sent, self.ledger.delivered,
                      self.ledger.diverted, self.ledger.dropped)
        return {"duration": duration,
                "frames_sent": end_totals[0] - start_totals[0],
                "delivered": end_totals[1] - start_totals[1],
                "diverted": end_totals[2] - start_totals[2],
                "dropped": end_totals[3] - start_totals[3],
                "virtual_now": self.virtual_now,
                "conservation_ok": self.ledger.conservation_ok(),
                "ledger": self.ledger.to_dict()}

    def _inject(self, sw: SimSwitch, in_port: int, frame: Frame, count: int,
                src_host: str) -> None:
        pending = None
        with self.lock:
            self.ledger.sent[src_host] += count
            self.ledger.total_sent += count
            c = sw.counters[in_port]
            c.rx_packets += count
            c.rx_bytes += count * frame.size
            outputs: list = []
            table_id = 0
            for _ in range(4):  # pipeline depth bound
                se = sw._lookup(table_id, in_port, frame)
                if se is None:
                    break
                se.last_hit = self.virtual_now
                goto = None
                to_controller = False
                for act in se.entry.actions:
                    if act[0] == "output":
                        outputs.append(act[1])
                    elif act[0] == "goto":
                        goto = act[1]
                    elif act[0] == "controller":
                        to_controller = True
                if to_controller:
                    token = next(sw._tokens)
                    pending = _PendingBatch(frame=frame, count=count, in_port=in_port)
                    sw.buffers[token] = pending
                    packet_in = of.PacketIn(
                        xid=next(sw._xids), buffer_id=token, in_port=in_port,
                        reason=of.OFPR_NO_MATCH,
                        data=of.mac_to_bytes(frame.dst_mac) + of.mac_to_bytes(frame.src_mac)
                        + frame.eth_type.to_bytes(2, "big"),
                        total_len=frame.size)
                    break
                if goto is None:
                    break
                table_id = goto
        if pending is not None:
            sw._send(packet_in)
            if pending.event.wait(timeout=5.0):
                with self.lock:
                    outputs.extend(pending.outputs)
            else:
                self.controller_timeouts += 1
                with self.lock:
                    sw.buffers = {t: p for t, p in sw.buffers.items() if p is not pending}
        with self.lock:
            self._deliver(sw, in_port, frame, count, outputs)

    def _deliver(self, sw: SimSwitch, in_port: int, frame: Frame, count: int,
                 outputs: list) -> None:
        if not outputs:
            self.ledger.dropped += count
            return
        for port in outputs:
            if port not in sw.counters:
                continue
            c = sw.counters[port]
            c.tx_packets += count
            c.tx_bytes += count * frame.size
            host = self._host_at.get((sw.spec.name, port))
            if host is not None:
                self.ledger.seen[host.name] += count
                if host.mac == frame.dst_mac or frame.dst_mac == BROADCAST_MAC:
                    self.ledger.received[host.name] += count
                    hist = self.ledger.received_hist[host.name]
                    key = (frame.eth_type, frame.ip_proto)
                    hist[key] = hist.get(key, 0) + count
        dst = next((h for h in self.spec.hosts.values() if h.mac == frame.dst_mac), None)
        if dst is not None and dst.switch == sw.spec.name and dst.port in outputs:
            self.ledger.delivered += count
        else:
            self.ledger.diverted += count
        if len(outputs) > 1:
            self.ledger.extra_copies += count * (len(outputs) - 1)
