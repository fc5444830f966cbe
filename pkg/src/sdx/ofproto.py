"""OpenFlow 1.3 wire codec.

Encodes and decodes the message subset the controller, stats poller, and
switch simulator exchange: handshake, echo, flow-mod, packet-in/out, barrier,
port-status, and the PORT_STATS/DESC multiparts. Big-endian throughout; match
fields use OXM TLV encoding padded to 8-byte boundaries. The decoder is total:
any input yields a message or a structured OfDecodeError, never a crash.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

OFP_VERSION = 0x04
OFP_HEADER_LEN = 8
OFP_MAX_LEN = 0xFFFF

OFPT_HELLO = 0
OFPT_ERROR = 1
OFPT_ECHO_REQUEST = 2
OFPT_ECHO_REPLY = 3
OFPT_FEATURES_REQUEST = 5
OFPT_FEATURES_REPLY = 6
OFPT_PACKET_IN = 10
OFPT_PORT_STATUS = 12
OFPT_PACKET_OUT = 13
OFPT_FLOW_MOD = 14
OFPT_MULTIPART_REQUEST = 18
OFPT_MULTIPART_REPLY = 19
OFPT_BARRIER_REQUEST = 20
OFPT_BARRIER_REPLY = 21

OFPFC_ADD = 0
OFPFC_MODIFY = 1
OFPFC_MODIFY_STRICT = 2
OFPFC_DELETE = 3
OFPFC_DELETE_STRICT = 4

OFPP_FLOOD = 0xFFFFFFFB
OFPP_CONTROLLER = 0xFFFFFFFD
OFPP_ANY = 0xFFFFFFFF
OFPG_ANY = 0xFFFFFFFF
OFP_NO_BUFFER = 0xFFFFFFFF
OFPCML_NO_BUFFER = 0xFFFF
OFPTT_ALL = 0xFF

OFPR_NO_MATCH = 0
OFPR_ACTION = 1

OFPMP_DESC = 0
OFPMP_PORT_STATS = 4

OFPXMC_OPENFLOW_BASIC = 0x8000

# field number and payload size for the supported OXM basic-class fields
OXM_FIELDS = {
    "in_port": (0, 4),
    "eth_dst": (3, 6),
    "eth_src": (4, 6),
    "eth_type": (5, 2),
    "vlan_vid": (6, 2),
    "ip_proto": (10, 1),
}
_OXM_BY_NUM = {num: (name, size) for name, (num, size) in OXM_FIELDS.items()}
# canonical emission order (prerequisite-safe): numeric field order
_OXM_ORDER = sorted(OXM_FIELDS, key=lambda n: OXM_FIELDS[n][0])


class OfCodecError(Exception):
    pass


class OfEncodeError(OfCodecError):
    pass


class FramingError(OfCodecError):
    """Connection-fatal: a header announced a length below 8."""


class OfDecodeError(OfCodecError):
    def __init__(self, code: str, message: str, msg_type: int | None = None,
                 frame: bytes | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.msg_type = msg_type
        self.frame = frame

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def _pad8(n: int) -> int:
    return (n + 7) // 8 * 8


def mac_to_bytes(mac: str) -> bytes:
    parts = mac.split(":")
    if len(parts) != 6:
        raise OfEncodeError(f"bad MAC address {mac!r}")
    try:
        return bytes(int(p, 16) for p in parts)
    except ValueError as exc:
        raise OfEncodeError(f"bad MAC address {mac!r}") from exc


def bytes_to_mac(raw: bytes) -> str:
    return ":".join(f"{b:02x}" for b in raw)


class _Reader:
    __slots__ = ("data", "pos", "end")

    def __init__(self, data: bytes, start: int = 0, end: int | None = None):
        self.data = data
        self.pos = start
        self.end = len(data) if end is None else end

    @property
    def remaining(self) -> int:
        return self.end - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.remaining < n:
            raise OfDecodeError("truncated", f"needed {n} bytes, have {self.remaining}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("!" + fmt, self.take(struct.calcsize("!" + fmt)))


# ---------------------------------------------------------------------------
# Match / OXM

@dataclass(frozen=True)
class OxmTlv:
    oxm_class: int
    field: int
    hasmask: bool
    payload: bytes

    def encode(self) -> bytes:
        fb = (self.field << 1) | (1 if self.hasmask else 0)
        return struct.pack("!HBB", self.oxm_class, fb, len(self.payload)) + self.payload


def _oxm_value(name: str, value) -> bytes:
    num, size = OXM_FIELDS[name]
    if name in ("eth_dst", "eth_src"):
        return mac_to_bytes(value)
    if not isinstance(value, int) or value < 0 or value >= (1 << (8 * size)):
        raise OfEncodeError(f"{name} value {value!r} out of range")
    return value.to_bytes(size, "big")


@dataclass(frozen=True)
class Match:
    oxms: tuple = ()

    @classmethod
    def build(cls, **fields) -> "Match":
        oxms = []
        for name in _OXM_ORDER:
            if name in fields and fields[name] is not None:
                num, _ = OXM_FIELDS[name]
                oxms.append(OxmTlv(OFPXMC_OPENFLOW_BASIC, num, False, _oxm_value(name, fields[name])))
                fields = {k: v for k, v in fields.items() if k != name}
        unknown = {k for k, v in fields.items() if v is not None and k not in OXM_FIELDS}
        if unknown:
            raise OfEncodeError(f"unsupported match fields: {sorted(unknown)}")
        return cls(oxms=tuple(oxms))

    def to_dict(self) -> dict:
        out = {}
        for tlv in self.oxms:
            if tlv.oxm_class != OFPXMC_OPENFLOW_BASIC or tlv.hasmask:
                continue
            known = _OXM_BY_NUM.get(tlv.field)
            if known is None:
                continue
            name, _ = known
            if name in ("eth_dst", "eth_src"):
                out[name] = bytes_to_mac(tlv.payload)
            else:
                out[name] = int.from_bytes(tlv.payload, "big")
        return out

    def get(self, name: str):
        return self.to_dict().get(name)

    def encode(self) -> bytes:
        body = b"".join(t.encode() for t in self.oxms)
        length = 4 + len(body)
        return struct.pack("!HH", 1, length) + body + b"\x00" * (_pad8(length) - length)


def _decode_match(r: _Reader) -> Match:
    mtype, length = r.unpack("HH")
    if mtype != 1:
        raise OfDecodeError("bad_match", f"unsupported match type {mtype}")
    if length < 4:
        raise OfDecodeError("bad_match", f"match length {length} below header size")
    oxm_end = r.pos + (length - 4)
    if oxm_end > r.end:
        raise OfDecodeError("truncated", "match overruns frame")
    oxms = []
    while r.pos < oxm_end:
        if oxm_end - r.pos < 4:
            raise OfDecodeError("bad_oxm", "trailing bytes shorter than an OXM header")
        oxm_class, fb, plen = r.unpack("HBB")
        if r.pos + plen > oxm_end:
            raise OfDecodeError("bad_oxm", "OXM payload overruns match")
        payload = r.take(plen)
        fnum, hasmask = fb >> 1, bool(fb & 1)
        if oxm_class == OFPXMC_OPENFLOW_BASIC and fnum in _OXM_BY_NUM:
            _, size = _OXM_BY_NUM[fnum]
            expected = size * 2 if hasmask else size
            if plen != expected:
                raise OfDecodeError("bad_oxm",
                                    f"OXM field {fnum} payload {plen} bytes, expected {expected}")
        # unknown OXMs are preserved opaquely, not dropped
        oxms.append(OxmTlv(oxm_class, fnum, hasmask, payload))
    r.take(_pad8(length) - length)
    return Match(oxms=tuple(oxms))


# ---------------------------------------------------------------------------
# Actions and instructions

@dataclass(frozen=True)
class Output:
    port: int
    max_len: int = OFPCML_NO_BUFFER

    def encode(self) -> bytes:
        return struct.pack("!HHIH6x", 0, 16, self.port, self.max_len)


def _encode_actions(actions) -> bytes:
    return b"".join(a.encode() for a in actions)


def _decode_actions(r: _Reader, end: int) -> tuple:
    actions = []
    while r.pos < end:
        if end - r.pos < 4:
            raise OfDecodeError("bad_action", "trailing bytes shorter than an action header")
        atype, alen = r.unpack("HH")
        if alen < 8 or r.pos - 4 + alen > end:
            raise OfDecodeError("bad_action", f"action length {alen} invalid")
        body = r.take(alen - 4)
        if atype != 0:
            raise OfDecodeError("bad_action", f"unsupported action type {atype}")
        if alen != 16:
            raise OfDecodeError("bad_action", f"output action length {alen}, expected 16")
        port, max_len = struct.unpack("!IH6x", body)
        actions.append(Output(port=port, max_len=max_len))
    return tuple(actions)


@dataclass(frozen=True)
class ApplyActions:
    actions: tuple = ()

    def encode(self) -> bytes:
        body = _encode_actions(self.actions)
        return struct.pack("!HH4x", 4, 8 + len(body)) + body


@dataclass(frozen=True)
class GotoTable:
    table_id: int

    def encode(self) -> bytes:
        return struct.pack("!HHB3x", 1, 8, self.table_id)


def _decode_instructions(r: _Reader) -> tuple:
    instructions = []
    while r.remaining > 0:
        if r.remaining < 4:
            raise OfDecodeError("bad_instruction", "trailing bytes shorter than a header")
        itype, ilen = r.unpack("HH")
        if ilen < 8 or r.pos - 4 + ilen > r.end:
            raise OfDecodeError("bad_instruction", f"instruction length {ilen} invalid")
        if itype == 1:
            table_id, = struct.unpack("!B3x", r.take(4))
            instructions.append(GotoTable(table_id=table_id))
        elif itype == 4:
            r.take(4)
            sub_end = r.pos + (ilen - 8)
            instructions.append(ApplyActions(actions=_decode_actions(r, sub_end)))
        else:
            raise OfDecodeError("bad_instruction", f"unsupported instruction type {itype}")
    return tuple(instructions)


# ---------------------------------------------------------------------------
# Messages

@dataclass(frozen=True)
class Hello:
    xid: int
    versions: tuple | None = None  # None = no version bitmap element


@dataclass(frozen=True)
class EchoRequest:
    xid: int
    data: bytes = b""


@dataclass(frozen=True)
class EchoReply:
    xid: int
    data: bytes = b""


@dataclass(frozen=True)
class FeaturesRequest:
    xid: int


@dataclass(frozen=True)
class FeaturesReply:
    xid: int
    dp_id: int
    n_buffers: int = 0
    n_tables: int = 3
    aux_id: int = 0
    capabilities: int = 0


@dataclass(frozen=True)
class FlowMod:
    xid: int
    table_id: int = 0
    command: int = OFPFC_ADD
    priority: int = 0
    cookie: int = 0
    cookie_mask: int = 0
    match: Match = field(default_factory=Match)
    instructions: tuple = ()
    idle_timeout: int = 0
    hard_timeout: int = 0
    buffer_id: int = OFP_NO_BUFFER
    out_port: int = OFPP_ANY
    out_group: int = OFPG_ANY
    flags: int = 0


@dataclass(frozen=True)
class PacketIn:
    xid: int
    buffer_id: int
    in_port: int
    reason: int
    data: bytes
    table_id: int = 0
    cookie: int = 0
    total_len: int | None = None

    def __post_init__(self):
        if self.total_len is None:
            object.__setattr__(self, "total_len", len(self.data))


@dataclass(frozen=True)
class PacketOut:
    xid: int
    buffer_id: int
    in_port: int
    actions: tuple = ()
    data: bytes = b""


@dataclass(frozen=True)
class PortStatsEntry:
    port_no: int
    rx_packets: int = 0
    tx_packets: int = 0
    rx_bytes: int = 0
    tx_bytes: int = 0
    rx_dropped: int = 0
    tx_dropped: int = 0
    rx_errors: int = 0
    tx_errors: int = 0
    duration_sec: int = 0


@dataclass(frozen=True)
class PortStatsRequest:
    xid: int
    port_no: int = OFPP_ANY


@dataclass(frozen=True)
class PortStatsReply:
    xid: int
    entries: tuple = ()
    flags: int = 0


@dataclass(frozen=True)
class DescRequest:
    xid: int


@dataclass(frozen=True)
class DescReply:
    xid: int
    mfr_desc: str = ""
    hw_desc: str = ""
    sw_desc: str = ""
    serial_num: str = ""
    dp_desc: str = ""


@dataclass(frozen=True)
class BarrierRequest:
    xid: int


@dataclass(frozen=True)
class BarrierReply:
    xid: int


@dataclass(frozen=True)
class PortDesc:
    port_no: int
    hw_addr: str = "00:00:00:00:00:00"
    name: str = ""


@dataclass(frozen=True)
class PortStatus:
    xid: int
    reason: int
    port: PortDesc


# ---------------------------------------------------------------------------
# Encoding

def _body_hello(msg: Hello) -> bytes:
    if msg.versions is None:
        return b""
    bitmap = 0
    for v in msg.versions:
        if not 0 <= v < 32:
            raise OfEncodeError(f"version {v} outside bitmap range")
        bitmap |= 1 << v
    return struct.pack("!HHI", 1, 8, bitmap)


def _body_features_reply(msg: FeaturesReply) -> bytes:
    return struct.pack("!QIBB2xII", msg.dp_id, msg.n_buffers, msg.n_tables,
                       msg.aux_id, msg.capabilities, 0)


def _body_flow_mod(msg: FlowMod) -> bytes:
    head = struct.pack("!QQBBHHHIIIH2x", msg.cookie, msg.cookie_mask, msg.table_id,
                       msg.command, msg.idle_timeout, msg.hard_timeout, msg.priority,
                       msg.buffer_id, msg.out_port, msg.out_group, msg.flags)
    return head + msg.match.encode() + b"".join(i.encode() for i in msg.instructions)


def _body_packet_in(msg: PacketIn) -> bytes:
    head = struct.pack("!IHBBQ", msg.buffer_id, msg.total_len, msg.reason,
                       msg.table_id, msg.cookie)
    return head + Match.build(in_port=msg.in_port).encode() + b"\x00\x00" + msg.data


def _body_packet_out(msg: PacketOut) -> bytes:
    abytes = _encode_actions(msg.actions)
    return struct.pack("!IIH6x", msg.buffer_id, msg.in_port, len(abytes)) + abytes + msg.data


def _body_port_stats_entry(e: PortStatsEntry) -> bytes:
    return struct.pack("!I4x12QII", e.port_no, e.rx_packets, e.tx_packets, e.rx_bytes,
                       e.tx_bytes, e.rx_dropped, e.tx_dropped, e.rx_errors, e.tx_errors,
                       0, 0, 0, 0, e.duration_sec, 0)


def _pad_str(s: str, size: int) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) >= size:
        raise OfEncodeError(f"string longer than {size - 1} bytes")
    return raw + b"\x00" * (size - len(raw))


def _body_port_desc(p: PortDesc) -> bytes:
    return struct.pack("!I4x6s2x16sIIIIIIII", p.port_no, mac_to_bytes(p.hw_addr),
                       _pad_str(p.name, 16), 0, 0, 0, 0, 0, 0, 0, 0)


_MSG_TYPES = {
    Hello: OFPT_HELLO,
    EchoRequest: OFPT_ECHO_REQUEST,
    EchoReply: OFPT_ECHO_REPLY,
    FeaturesRequest: OFPT_FEATURES_REQUEST,
    FeaturesReply: OFPT_FEATURES_REPLY,
    PacketIn: OFPT_PACKET_IN,
    PortStatus: OFPT_PORT_STATUS,
    PacketOut: OFPT_PACKET_OUT,
    FlowMod: OFPT_FLOW_MOD,
    PortStatsRequest: OFPT_MULTIPART_REQUEST,
    DescRequest: OFPT_MULTIPART_REQUEST,
    PortStatsReply: OFPT_MULTIPART_REPLY,
    DescReply: OFPT_MULTIPART_REPLY,
    BarrierRequest: OFPT_BARRIER_REQUEST,
    BarrierReply: OFPT_BARRIER_REPLY,
}


def encode(msg) -> bytes:
    mtype = _MSG_TYPES.get(type(msg))
    if mtype is None:
        raise OfEncodeError(f"cannot encode {type(msg).__name__}")
    if isinstance(msg, Hello):
        body = _body_hello(msg)
    elif isinstance(msg, (EchoRequest, EchoReply)):
        body = msg.data
    elif isinstance(msg, (FeaturesRequest, BarrierRequest, BarrierReply)):
        body = b""
    elif isinstance(msg, FeaturesReply):
        body = _body_features_reply(msg)
    elif isinstance(msg, FlowMod):
        body = _body_flow_mod(msg)
    elif isinstance(msg, PacketIn):
        body = _body_packet_in(msg)
    elif isinstance(msg, PacketOut):
        body = _body_packet_out(msg)
    elif isinstance(msg, PortStatsRequest):
        body = struct.pack("!HH4xI4x", OFPMP_PORT_STATS, 0, msg.port_no)
    elif isinstance(msg, DescRequest):
        body = struct.pack("!HH4x", OFPMP_DESC, 0)
    elif isinstance(msg, PortStatsReply):
        body = struct.pack("!HH4x", OFPMP_PORT_STATS, msg.flags)
        body += b"".join(_body_port_stats_entry(e) for e in msg.entries)
    elif isinstance(msg, DescReply):
        body = struct.pack("!HH4x", OFPMP_DESC, 0)
        body += b"".join((_pad_str(msg.mfr_desc, 256), _pad_str(msg.hw_desc, 256),
                          _pad_str(msg.sw_desc, 256), _pad_str(msg.serial_num, 32),
                          _pad_str(msg.dp_desc, 256)))
    elif isinstance(msg, PortStatus):
        body = struct.pack("!B7x", msg.reason) + _body_port_desc(msg.port)
    else:  # pragma: no cover - registry and branches kept in sync
        raise OfEncodeError(f"cannot encode {type(msg).__name__}")

    length = OFP_HEADER_LEN + len(body)
    if length > OFP_MAX_LEN:
        raise OfEncodeError(f"message length {length} exceeds {OFP_MAX_LEN}")
    return struct.pack("!BBHI", OFP_VERSION, mtype, length, msg.xid & 0xFFFFFFFF) + body


# ---------------------------------------------------------------------------
# Decoding

def _decode_hello(xid: int, r: _Reader) -> Hello:
    if r.remaining == 0:
        return Hello(xid=xid)
    versions: list = []
    saw_bitmap = False
    while r.remaining > 0:
        if r.remaining < 4:
            raise OfDecodeError("bad_hello", "trailing bytes shorter than an element header")
        etype, elen = r.unpack("HH")
        if elen < 4 or r.pos - 4 + elen > r.end:
            raise OfDecodeError("bad_hello", f"hello element length {elen} invalid")
        content = r.take(elen - 4)
        r.take(min(_pad8(elen) - elen, r.remaining))
        if etype == 1:
            saw_bitmap = True
            for i in range(len(content) // 4):
                word = int.from_bytes(content[4 * i:4 * i + 4], "big")
                versions.extend(32 * i + b for b in range(32) if word & (1 << b))
    return Hello(xid=xid, versions=tuple(sorted(versions)) if saw_bitmap else None)


def _decode_port_stats_reply(xid: int, flags: int, r: _Reader) -> PortStatsReply:
    entries = []
    while r.remaining > 0:
        if r.remaining < 112:
            raise OfDecodeError("truncated", "partial port-stats entry")
        vals = r.unpack("I4x12QII")
        entries.append(PortStatsEntry(
            port_no=vals[0], rx_packets=vals[1], tx_packets=vals[2], rx_bytes=vals[3],
            tx_bytes=vals[4], rx_dropped=vals[5], tx_dropped=vals[6], rx_errors=vals[7],
            tx_errors=vals[8], duration_sec=vals[13]))
    return PortStatsReply(xid=xid, entries=tuple(entries), flags=flags)


def _cstr(raw: bytes) -> str:
    return raw.split(b"\x00", 1)[0].decode("utf-8", "replace")


def decode(data: bytes):
    """Decode the first complete frame in data (see frame_stream for splitting)."""
    if len(data) < OFP_HEADER_LEN:
        raise OfDecodeError("truncated", f"frame shorter than header: {len(data)} bytes")
    version, mtype, length, xid = struct.unpack("!BBHI", data[:8])
    if version != OFP_VERSION:
        raise OfDecodeError("bad_version", f"unsupported version 0x{version:02x}",
                            msg_type=mtype, frame=bytes(data[:min(len(data), length or 8)]))
    if length < OFP_HEADER_LEN:
        raise OfDecodeError("bad_length", f"header length {length} below minimum 8")
    if len(data) < length:
        raise OfDecodeError("truncated", f"frame claims {length} bytes, have {len(data)}")
    frame = bytes(data[:length])
    r = _Reader(frame, OFP_HEADER_LEN)

    if mtype == OFPT_HELLO:
        return _decode_hello(xid, r)
    if mtype == OFPT_ECHO_REQUEST:
        return EchoRequest(xid=xid, data=r.take(r.remaining))
    if mtype == OFPT_ECHO_REPLY:
        return EchoReply(xid=xid, data=r.take(r.remaining))
    if mtype == OFPT_FEATURES_REQUEST:
        return FeaturesRequest(xid=xid)
    if mtype == OFPT_FEATURES_REPLY:
        dp_id, n_buffers, n_tables, aux_id, caps, _ = r.unpack("QIBB2xII")
        return FeaturesReply(xid=xid, dp_id=dp_id, n_buffers=n_buffers,
                             n_tables=n_tables, aux_id=aux_id, capabilities=caps)
    if mtype == OFPT_FLOW_MOD:
        (cookie, cookie_mask, table_id, command, idle, hard, priority,
         buffer_id, out_port, out_group, flags) = r.unpack("QQBBHHHIIIH2x")
        match = _decode_match(r)
        instructions = _decode_instructions(r)
        return FlowMod(xid=xid, table_id=table_id, command=command, priority=priority,
                       cookie=cookie, cookie_mask=cookie_mask, match=match,
                       instructions=instructions, idle_timeout=idle, hard_timeout=hard,
                       buffer_id=buffer_id, out_port=out_port, out_group=out_group,
                       flags=flags)
    if mtype == OFPT_PACKET_IN:
        buffer_id, total_len, reason, table_id, cookie = r.unpack("IHBBQ")
        match = _decode_match(r)
        r.take(2)
        in_port = match.get("in_port")
        if in_port is None:
            raise OfDecodeError("bad_packet_in", "packet-in match lacks in_port")
        return PacketIn(xid=xid, buffer_id=buffer_id, in_port=in_port, reason=reason,
                        data=r.take(r.remaining), table_id=table_id, cookie=cookie,
                        total_len=total_len)
    if mtype == OFPT_PACKET_OUT:
        buffer_id, in_port, actions_len = r.unpack("IIH6x")
        if actions_len > r.remaining:
            raise OfDecodeError("truncated", "actions overrun packet-out frame")
        actions = _decode_actions(r, r.pos + actions_len)
        return PacketOut(xid=xid, buffer_id=buffer_id, in_port=in_port,
                         actions=actions, data=r.take(r.remaining))
    if mtype in (OFPT_MULTIPART_REQUEST, OFPT_MULTIPART_REPLY):
        mp_type, flags = r.unpack("HH4x")
        if mtype == OFPT_MULTIPART_REQUEST:
            if mp_type == OFPMP_PORT_STATS:
                port_no, = r.unpack("I4x")
                return PortStatsRequest(xid=xid, port_no=port_no)
            if mp_type == OFPMP_DESC:
                return DescRequest(xid=xid)
            raise OfDecodeError("bad_multipart", f"unsupported multipart type {mp_type}",
                                msg_type=mtype, frame=frame)
        if mp_type == OFPMP_PORT_STATS:
            return _decode_port_stats_reply(xid, flags, r)
        if mp_type == OFPMP_DESC:
            return DescReply(xid=xid, mfr_desc=_cstr(r.take(256)), hw_desc=_cstr(r.take(256)),
                             sw_desc=_cstr(r.take(256)), serial_num=_cstr(r.take(32)),
                             dp_desc=_cstr(r.take(256)))
        raise OfDecodeError("bad_multipart", f"unsupported multipart type {mp_type}",
                            msg_type=mtype, frame=frame)
    if mtype == OFPT_BARRIER_REQUEST:
        return BarrierRequest(xid=xid)
    if mtype == OFPT_BARRIER_REPLY:
        return BarrierReply(xid=xid)
    if mtype == OFPT_PORT_STATUS:
        reason, = r.unpack("B7x")
        port_no, hw_addr, name = r.unpack("I4x6s2x16s")
        r.take(32)
        return PortStatus(xid=xid, reason=reason,
                          port=PortDesc(port_no=port_no, hw_addr=bytes_to_mac(hw_addr),
                                        name=_cstr(name)))
    raise OfDecodeError("unknown_type", f"unknown message type {mtype}",
                        msg_type=mtype, frame=frame)


# ---------------------------------------------------------------------------
# Stream framing

class FrameBuffer:
    """Accumulates stream reads and splits them on header length.

    No byte is lost or duplicated across feeds; a partial trailing frame is
    retained until completed by later reads.
    """

    def __init__(self):
        self._buf = bytearray()

    @property
    def residual(self) -> bytes:
        return bytes(self._buf)

    def feed(self, data: bytes) -> list:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= OFP_HEADER_LEN:
            length = int.from_bytes(self._buf[2:4], "big")
            if length < OFP_HEADER_LEN:
                raise FramingError(f"header announced length {length} < 8")
            if len(self._buf) < length:
                break
            frames.append(bytes(self._buf[:length]))
            del self._buf[:length]
        return frames
