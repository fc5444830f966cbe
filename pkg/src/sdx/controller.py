"""OpenFlow control plane.

Accepts switch connections, drives the version handshake, pushes compiled
flow tables, answers PacketIn with L2 learning decisions, applies config
changes at runtime with barrier confirmation, and reports live status.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
import time
from dataclasses import dataclass, field

from . import ofproto as of
from .compiler import (L2_LEARN_COOKIE, L2_LEARN_PRIORITY, L2_TABLE, COOKIE_NS_BIT,
                       FlowTable, compile_datapath, entry_to_flowmod, match_fields,
                       plan_update, FlowEntry)
from .config import ConfigValidationError, FabricConfig, config_fingerprint, validate

log = logging.getLogger(__name__)

HANDSHAKE = "HANDSHAKE"
SYNCING = "SYNCING"
STEADY = "STEADY"
DEAD = "DEAD"

BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"


class ControllerError(Exception):
    pass


class RequestTimeout(ControllerError):
    pass


class ApplyError(ControllerError):
    def __init__(self, message: str, report: "ApplyReport"):
        super().__init__(message)
        self.report = report


@dataclass
class ApplyReport:
    per_dp: dict = field(default_factory=dict)  # dp -> {"added", "removed", "deferred"}
    deferred: tuple = ()
    failed: tuple = ()
    duration: float = 0.0
    fingerprint: str = ""

    def to_dict(self) -> dict:
        return {"per_dp": self.per_dp, "deferred": list(self.deferred),
                "failed": list(self.failed), "duration": self.duration,
                "fingerprint": self.fingerprint}


@dataclass
class ControllerStatus:
    endpoints: dict
    roles: dict
    cpu_percent: float
    resident_memory_bytes: int
    virtual_memory_bytes: int
    sessions: dict

    def to_dict(self) -> dict:
        return {"endpoints": self.endpoints, "roles": self.roles,
                "cpu_percent": self.cpu_percent,
                "resident_memory_bytes": self.resident_memory_bytes,
                "virtual_memory_bytes": self.virtual_memory_bytes,
                "sessions": self.sessions}


class Heartbeats:
    """Role liveness: a role is live if it beat within the last window."""

    def __init__(self, window: float = 5.0):
        self.window = window
        self._beats: dict = {}
        self._lock = threading.Lock()

    def beat(self, role: str) -> None:
        with self._lock:
            self._beats[role] = time.monotonic()

    def live(self, role: str) -> bool:
        with self._lock:
            last = self._beats.get(role)
        return last is not None and time.monotonic() - last <= self.window


class DatapathSession:
    def __init__(self, sock: socket.socket, addr):
        self.sock = sock
        self.addr = addr
        self.state = HANDSHAKE
        self.dp_name: str | None = None
        self.dp_id: int | None = None
        self.negotiated_version: int | None = None
        self.pushed_table: FlowTable | None = None
        self.fingerprint = ""
        self.last_rtt: float | None = None
        self.created = time.monotonic()
        self.frames = of.FrameBuffer()
        self._send_lock = threading.Lock()
        self._xids = itertools.count(1)
        self._waiters: dict = {}
        self._waiter_lock = threading.Lock()
        self.echo_pending: dict = {}
        self.last_echo_sent = time.monotonic()
        self.malformed_packet_ins = 0
        self.sync_xid: int | None = None
        self.sync_target: FlowTable | None = None

    def next_xid(self) -> int:
        return next(self._xids)

    def send(self, msg) -> None:
        data = of.encode(msg)
        with self._send_lock:
            self.sock.sendall(data)

    def request(self, msg, timeout: float):
        ev = threading.Event()
        slot: list = []
        with self._waiter_lock:
            self._waiters[msg.xid] = (ev, slot)
        try:
            self.send(msg)
        except OSError:
            with self._waiter_lock:
                self._waiters.pop(msg.xid, None)
            raise RequestTimeout(f"send failed for {self.dp_name}")
        if not ev.wait(timeout):
            with self._waiter_lock:
                self._waiters.pop(msg.xid, None)
            raise RequestTimeout(f"no reply from {self.dp_name} within {timeout}s")
        return slot[0]

    def resolve(self, xid: int, reply) -> bool:
        with self._waiter_lock:
            waiter = self._waiters.pop(xid, None)
        if waiter is None:
            return False
        ev, slot = waiter
        slot.append(reply)
        ev.set()
        return True

    def close(self) -> None:
        self.state = DEAD
        try:
            self.sock.close()
        except OSError:
            pass

    def summary(self) -> dict:
        return {"state": self.state,
                "dp_id": f"0x{self.dp_id:x}" if self.dp_id is not None else None,
                "last_echo_rtt_ms": round(self.last_rtt * 1000, 3) if self.last_rtt else None,
                "fingerprint": self.fingerprint}


class SdxController:
    def __init__(self, cfg: FabricConfig, host: str = "127.0.0.1", port: int = 6653, *,
                 echo_interval: float = 5.0, echo_misses: int = 3,
                 handshake_timeout: float = 10.0, l2_idle_timeout: float = 300.0,
                 barrier_timeout: float = 5.0, heartbeat=None):
        report = validate(cfg)
        if not report.ok:
            raise ConfigValidationError(report)
        self._active = cfg
        self.host = host
        self.port = port
        self.echo_interval = echo_interval
        self.echo_misses = echo_misses
        self.handshake_timeout = handshake_timeout
        self.l2_idle_timeout = l2_idle_timeout
        self.barrier_timeout = barrier_timeout
        self.heartbeat = heartbeat
        self._sessions: dict = {}  # dp_name -> DatapathSession
        self._sessions_lock = threading.Lock()
        self._l2: dict = {}  # (dp_name, vlan) -> {mac: (port, last_seen)}
        self._l2_lock = threading.Lock()
        self._apply_lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._threads: list = []
        self._stop = threading.Event()
        self.listening = False

    # -- lifecycle -----------------------------------------------------------
    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(32)
        listener.settimeout(0.25)
        self._listener = listener
        self.port = listener.getsockname()[1]
        self.listening = True
        for target, name in ((self._accept_loop, "of-accept"), (self._ticker, "of-ticker")):
            t = threading.Thread(target=target, name=name, daemon=True)
            t.start()
            self._threads.append(t)
        log.info("controller listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        self._stop.set()
        self.listening = False
        if self._listener:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._sessions_lock:
            sessions = list(self._sessions.values())
        for sess in sessions:
            sess.close()
        for t in self._threads:
            t.join(timeout=5)

    @property
    def active_config(self) -> FabricConfig:
        return self._active

    @property
    def endpoint(self) -> tuple:
        return (self.host, self.port)

    # -- accept / session threads ---------------------------------------------
    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            if self.heartbeat:
                self.heartbeat("controller")
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            t = threading.Thread(target=self._serve, args=(conn, addr),
                                 name=f"of-session-{addr[1]}", daemon=True)
            t.start()

    def _serve(self, conn: socket.socket, addr) -> None:
        sess = DatapathSession(conn, addr)
        conn.settimeout(0.25)
        try:
            sess.send(of.Hello(xid=sess.next_xid(), versions=(of.OFP_VERSION,)))
        except OSError:
            sess.close()
            return
        while not self._stop.is_set() and sess.state != DEAD:
            try:
                data = conn.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            try:
                frames = sess.frames.feed(data)
            except of.FramingError as exc:
                log.warning("session %s framing error: %s", addr, exc)
                break
            for frame in frames:
                try:
                    msg = of.decode(frame)
                except of.OfDecodeError as exc:
                    if exc.code == "unknown_type":
                        log.info("session %s: skipping unknown message type %s",
                                 addr, exc.msg_type)
                        continue
                    log.warning("session %s decode error: %s", addr, exc)
                    sess.state = DEAD
                    break
                try:
                    self._dispatch(sess, msg)
                except OSError:
                    sess.state = DEAD
                    break
        self._drop_session(sess)

    def _drop_session(self, sess: DatapathSession) -> None:
        sess.close()
        if sess.dp_name:
            log.info("session for %s closed", sess.dp_name)

    # -- message dispatch ------------------------------------------------------
    def _dispatch(self, sess: DatapathSession, msg) -> None:
        if isinstance(msg, of.Hello):
            versions = msg.versions if msg.versions is not None else (of.OFP_VERSION,)
            if of.OFP_VERSION not in versions:
                log.warning("peer %s lacks OF 1.3 support (%s); closing", sess.addr, versions)
                sess.state = DEAD
                return
            sess.negotiated_version = of.OFP_VERSION
            sess.send(of.FeaturesRequest(xid=sess.next_xid()))
            return
        if isinstance(msg, of.FeaturesReply):
            self._on_features(sess, msg)
            return
        if isinstance(msg, of.BarrierReply):
            if sess.sync_xid is not None and msg.xid == sess.sync_xid:
                sess.pushed_table = sess.sync_target
                sess.fingerprint = sess.sync_target.fingerprint
                sess.sync_xid = None
                sess.sync_target = None
                sess.state = STEADY
                log.info("datapath %s steady, fingerprint %s", sess.dp_name, sess.fingerprint)
            else:
                sess.resolve(msg.xid, msg)
            return
        if isinstance(msg, (of.PortStatsReply, of.DescReply)):
            sess.resolve(msg.xid, msg)
            return
        if isinstance(msg, of.EchoRequest):
            sess.send(of.EchoReply(xid=msg.xid, data=msg.data))
            return
        if isinstance(msg, of.EchoReply):
            sent = sess.echo_pending.pop(msg.xid, None)
            if sent is not None:
                sess.last_rtt = time.monotonic() - sent
            return
        if isinstance(msg, of.PacketIn):
            if sess.state == STEADY:
                for out in self.handle_packet_in(sess, msg):
                    sess.send(out)
            return
        if isinstance(msg, of.PortStatus):
            log.info("port status from %s: port %s reason %s",
                     sess.dp_name, msg.port.port_no, msg.reason)
            return

    def _on_features(self, sess: DatapathSession, msg: of.FeaturesReply) -> None:
        dp = self._active.dp_by_id(msg.dp_id)
        if dp is None:
            log.warning("rejecting unknown dp_id 0x%x from %s", msg.dp_id, sess.addr)
            sess.state = DEAD
            return
        sess.dp_id = msg.dp_id
        sess.dp_name = dp.name
        with self._sessions_lock:
            old = self._sessions.get(dp.name)
            if old is not None and old is not sess:
                old.close()
            self._sessions[dp.name] = sess
        sess.state = SYNCING
        self._push_full(sess, self._active, blocking=False)

    def _push_full(self, sess: DatapathSession, cfg: FabricConfig, blocking: bool) -> None:
        """Reconnect/resync strategy: cookie-scoped wipe, then add everything."""
        target = compile_datapath(cfg, sess.dp_name)
        sess.send(of.FlowMod(xid=sess.next_xid(), table_id=of.OFPTT_ALL,
                             command=of.OFPFC_DELETE, cookie=COOKIE_NS_BIT,
                             cookie_mask=COOKIE_NS_BIT))
        for entry in target.entries:
            sess.send(entry_to_flowmod(entry, of.OFPFC_ADD, xid=sess.next_xid()))
        if blocking:
            sess.request(of.BarrierRequest(xid=sess.next_xid()), self.barrier_timeout)
            sess.pushed_table = target
            sess.fingerprint = target.fingerprint
            sess.state = STEADY
        else:
            xid = sess.next_xid()
            sess.sync_xid = xid
            sess.sync_target = target
            sess.send(of.BarrierRequest(xid=xid))
        self._clear_l2(sess.dp_name)

    # -- keepalive ---------------------------------------------------------------
    def _ticker(self) -> None:
        while not self._stop.is_set():
            if self.heartbeat:
                self.heartbeat("controller")
            now = time.monotonic()
            with self._sessions_lock:
                sessions = list(self._sessions.values())
            for sess in sessions:
                if sess.state in (HANDSHAKE, SYNCING) and \
                        now - sess.created > self.handshake_timeout:
                    log.warning("handshake timeout for %s", sess.addr)
                    sess.close()
                    continue
                if sess.state != STEADY:
                    continue
                if now - sess.last_echo_sent >= self.echo_interval:
                    if len(sess.echo_pending) >= self.echo_misses:
                        log.warning("datapath %s missed %d echoes; closing",
                                    sess.dp_name, len(sess.echo_pending))
                        sess.close()
                        continue
                    xid = sess.next_xid()
                    sess.echo_pending[xid] = now
                    sess.last_echo_sent = now
                    try:
                        sess.send(of.EchoRequest(xid=xid))
                    except OSError:
                        sess.close()
            self._expire_l2()
            self._stop.wait(0.2)

    # -- L2 learning ---------------------------------------------------------------
    def _clear_l2(self, dp_name: str) -> None:
        with self._l2_lock:
            for key in [k for k in self._l2 if k[0] == dp_name]:
                del self._l2[key]

    def _expire_l2(self) -> None:
        now = time.monotonic()
        with self._l2_lock:
            for table in self._l2.values():
                stale = [mac for mac, (_, seen) in table.items()
                         if now - seen > self.l2_idle_timeout]
                for mac in stale:
                    del table[mac]

    def l2_lookup(self, dp_name: str, vlan: str) -> dict:
        with self._l2_lock:
            return dict(self._l2.get((dp_name, vlan), {}))

    def handle_packet_in(self, sess: DatapathSession, msg: of.PacketIn) -> list:
        """L2 learning: learn source, unicast via FlowMod+PacketOut when the
        destination is known in the same VLAN, flood within the VLAN otherwise."""
        data = msg.data
        if len(data) < 14:
            sess.malformed_packet_ins += 1
            return []
        dst = of.bytes_to_mac(data[0:6])
        src = of.bytes_to_mac(data[6:12])
        port = msg.in_port
        dp = self._active.dps.get(sess.dp_name)
        if dp is None or port not in dp.interfaces:
            sess.malformed_packet_ins += 1
            return []
        vlan = dp.interfaces[port].native_vlan
        now = time.monotonic()
        out: list = []

        with self._l2_lock:
            table = self._l2.setdefault((sess.dp_name, vlan), {})
            if not _is_multicast(src):
                old = table.get(src)
                table[src] = (port, now)
                if old is not None and old[0] != port:
                    # host moved: purge stale unicast entries toward it
                    out.append(of.FlowMod(
                        xid=sess.next_xid(), table_id=L2_TABLE, command=of.OFPFC_DELETE,
                        match=of.Match.build(eth_dst=src)))
            dst_entry = None
            if not _is_multicast(dst):
                dst_entry = table.get(dst)
                if dst_entry is not None and now - dst_entry[1] > self.l2_idle_timeout:
                    del table[dst]
                    dst_entry = None

        if dst_entry is not None and dst_entry[0] != port:
            out_port = dst_entry[0]
            learned = FlowEntry(table_id=L2_TABLE, priority=L2_LEARN_PRIORITY,
                                match=match_fields(in_port=port, eth_dst=dst),
                                actions=(("output", out_port),), cookie=L2_LEARN_COOKIE)
            out.append(entry_to_flowmod(learned, of.OFPFC_ADD, xid=sess.next_xid(),
                                        idle_timeout=int(self.l2_idle_timeout)))
            out.append(of.PacketOut(xid=sess.next_xid(), buffer_id=msg.buffer_id,
                                    in_port=port, actions=(of.Output(out_port),),
                                    data=b"" if msg.buffer_id != of.OFP_NO_BUFFER else data))
        else:
            flood_ports = sorted(p for p, ifc in dp.interfaces.items()
                                 if ifc.native_vlan == vlan and p != port)
            out.append(of.PacketOut(xid=sess.next_xid(), buffer_id=msg.buffer_id,
                                    in_port=port,
                                    actions=tuple(of.Output(p) for p in flood_ports),
                                    data=b"" if msg.buffer_id != of.OFP_NO_BUFFER else data))
        return out

    # -- operations for stats poller and admin API ----------------------------------
    def steady_datapaths(self) -> list:
        with self._sessions_lock:
            return [name for name, s in self._sessions.items() if s.state == STEADY]

    def session(self, dp_name: str) -> DatapathSession | None:
        with self._sessions_lock:
            return self._sessions.get(dp_name)

    def request_port_stats(self, dp_name: str, timeout: float = 5.0) -> list:
        sess = self.session(dp_name)
        if sess is None or sess.state != STEADY:
            raise ControllerError(f"no steady session for {dp_name}")
        reply = sess.request(of.PortStatsRequest(xid=sess.next_xid()), timeout)
        return list(reply.entries)

    def session_summaries(self) -> dict:
        with self._sessions_lock:
            sessions = dict(self._sessions)
        out = {name: sess.summary() for name, sess in sessions.items()}
        for dp_name in self._active.dps:
            if dp_name not in out:
                out[dp_name] = {"state": "DISCONNECTED", "dp_id": None,
                                "last_echo_rtt_ms": None, "fingerprint": ""}
        return out

    def apply_config(self, new_cfg: FabricConfig) -> ApplyReport:
        """Plan and push per-dp deltas with barrier confirmation.

        The active config is swapped only if every connected dp confirms; on
        any failure, touched dps are resynced to the still-active config and
        ApplyError is raised. Disconnected dps are deferred, not failures.
        """
        with self._apply_lock:
            t0 = time.perf_counter()
            report_check = validate(new_cfg)
            if not report_check.ok:
                raise ConfigValidationError(report_check)

            per_dp: dict = {}
            deferred: list = []
            failed: list = []
            succeeded: list = []
            for dp_name in sorted(new_cfg.dps):
                sess = self.session(dp_name)
                if sess is None or sess.state != STEADY or sess.pushed_table is None:
                    deferred.append(dp_name)
                    per_dp[dp_name] = {"added": 0, "removed": 0, "deferred": True}
                    continue
                target = compile_datapath(new_cfg, dp_name)
                plan = plan_update(sess.pushed_table, target)
                per_dp[dp_name] = {"added": plan.n_added, "removed": plan.n_removed,
                                   "deferred": False}
                if plan.is_empty:
                    continue
                try:
                    # table change invalidates learned L2 shortcuts: flush them
                    sess.send(of.FlowMod(xid=sess.next_xid(), table_id=L2_TABLE,
                                         command=of.OFPFC_DELETE, cookie=L2_LEARN_COOKIE,
                                         cookie_mask=(1 << 64) - 1))
                    for step in plan.steps:
                        if step.kind == "delete_strict":
                            sess.send(entry_to_flowmod(step.entry, of.OFPFC_DELETE_STRICT,
                                                       xid=sess.next_xid()))
                        elif step.kind == "add":
                            sess.send(entry_to_flowmod(step.entry, of.OFPFC_ADD,
                                                       xid=sess.next_xid()))
                        else:
                            sess.request(of.BarrierRequest(xid=sess.next_xid()),
                                         self.barrier_timeout)
                    sess.pushed_table = target
                    sess.fingerprint = target.fingerprint
                    self._clear_l2(dp_name)
                    succeeded.append(dp_name)
                except (RequestTimeout, OSError) as exc:
                    log.error("apply failed on %s: %s", dp_name, exc)
                    failed.append(dp_name)

            duration = time.perf_counter() - t0
            if failed:
                # roll every touched dp back to the unchanged active config
                for dp_name in succeeded + failed:
                    sess = self.session(dp_name)
                    if sess is None:
                        continue
                    try:
                        self._push_full(sess, self._active, blocking=True)
                    except (RequestTimeout, OSError):
                        sess.close()
                report = ApplyReport(per_dp=per_dp, deferred=tuple(deferred),
                                     failed=tuple(failed), duration=duration,
                                     fingerprint=config_fingerprint(self._active))
                raise ApplyError(f"push failed on: {', '.join(failed)}", report)

            # drop sessions for datapaths removed from the config
            with self._sessions_lock:
                removed = [s for name, s in self._sessions.items() if name not in new_cfg.dps]
            for sess in removed:
                try:
                    sess.send(of.FlowMod(xid=sess.next_xid(), table_id=of.OFPTT_ALL,
                                         command=of.OFPFC_DELETE, cookie=COOKIE_NS_BIT,
                                         cookie_mask=COOKIE_NS_BIT))
                except OSError:
                    pass
                sess.close()

            self._active = new_cfg
            return ApplyReport(per_dp=per_dp, deferred=tuple(deferred), failed=(),
                               duration=duration, fingerprint=config_fingerprint(new_cfg))


def _is_multicast(mac: str) -> bool:
    return bool(int(mac.split(":")[0], 16) & 1)
