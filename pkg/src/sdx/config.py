"""Fabric configuration model.

The YAML document that carries all peering and ACL intent: VLAN declarations,
datapaths with their interfaces, and named ACL rule lists attached to port
ingress. This module parses, validates, diffs, and canonically re-emits that
document; everything downstream (rule compiler, controller, admin API) works
on the immutable ``FabricConfig`` value built here.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace

from . import yamlio
from .yamlio import Mapping, Scalar, Sequence, YamlSourceError

IDENT_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
INT_RE = re.compile(r"^(0[xX][0-9a-fA-F]+|[0-9]+)$")

VID_MIN, VID_MAX = 1, 4094
ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD


class ConfigError(Exception):
    """Base class; carries a machine-readable code plus source position."""

    def __init__(self, code: str, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.code}: {self.message}"
        return f"{self.code}: {self.message} (line {self.line}, column {self.col})"


class ConfigParseError(ConfigError):
    """Document is syntactically or structurally unusable (CLI exit 2)."""


class ConfigValidationError(ConfigError):
    """Document parsed but violates a model invariant (CLI exit 3)."""

    def __init__(self, report: "ValidationReport"):
        first = report.violations[0]
        super().__init__(first.code, first.message)
        self.report = report


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    path: tuple = ()

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "path": list(self.path)}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


@dataclass(frozen=True)
class VlanConfig:
    name: str
    vid: int
    description: str = ""


@dataclass(frozen=True)
class InterfaceConfig:
    native_vlan: str
    name: str = ""
    description: str = ""
    acls_in: tuple = ()  # ordered ACL name references; first match wins


@dataclass(frozen=True)
class DatapathConfig:
    name: str
    dp_id: int
    hardware: str = ""
    interfaces: dict = field(default_factory=dict)  # port number -> InterfaceConfig


@dataclass(frozen=True)
class AclRuleConfig:
    """One ACL rule: optional (dl_type, ip_proto) match plus its disposition."""

    dl_type: int | None = None
    ip_proto: int | None = None
    allow: bool = False
    mirror: int | None = None
    redirect: int | None = None

    @property
    def match_is_empty(self) -> bool:
        return self.dl_type is None and self.ip_proto is None

    def matches(self, dl_type: int, ip_proto: int | None) -> bool:
        if self.dl_type is not None and self.dl_type != dl_type:
            return False
        if self.ip_proto is not None and self.ip_proto != ip_proto:
            return False
        return True


@dataclass(frozen=True)
class FabricConfig:
    vlans: dict = field(default_factory=dict)  # name -> VlanConfig
    dps: dict = field(default_factory=dict)  # name -> DatapathConfig
    acls: dict = field(default_factory=dict)  # name -> tuple[AclRuleConfig]

    def dp_by_id(self, dp_id: int) -> DatapathConfig | None:
        for dp in self.dps.values():
            if dp.dp_id == dp_id:
                return dp
        return None

    def acl_referrers(self, acl_name: str) -> dict:
        """Map dp name -> sorted ports whose acls_in reference acl_name."""
        out: dict = {}
        for dp_name, dp in sorted(self.dps.items()):
            ports = [p for p, ifc in sorted(dp.interfaces.items()) if acl_name in ifc.acls_in]
            if ports:
                out[dp_name] = ports
        return out


# ---------------------------------------------------------------------------
# Parsing

def _err(code: str, message: str, node=None) -> ConfigParseError:
    if node is None:
        return ConfigParseError(code, message)
    return ConfigParseError(code, message, node.line, node.col)


def _want_map(node, what: str) -> Mapping:
    if not isinstance(node, Mapping):
        raise _err("bad_type", f"{what} must be a mapping", node)
    return node


def _want_seq(node, what: str) -> Sequence:
    if not isinstance(node, Sequence):
        raise _err("bad_type", f"{what} must be a sequence", node)
    return node


def _want_str(node, what: str) -> str:
    if not isinstance(node, Scalar):
        raise _err("bad_type", f"{what} must be a scalar", node)
    return node.raw


def _want_int(node, what: str) -> int:
    if not isinstance(node, Scalar):
        raise _err("bad_type", f"{what} must be an integer", node)
    raw = node.raw.strip()
    if not INT_RE.match(raw):
        raise _err("bad_value", f"{what} must be a decimal or 0x-hex integer, got {node.raw!r}", node)
    return int(raw, 16) if raw.lower().startswith("0x") else int(raw, 10)


def _want_bool(node, what: str) -> bool:
    if isinstance(node, Scalar) and node.raw in ("true", "True"):
        return True
    if isinstance(node, Scalar) and node.raw in ("false", "False"):
        return False
    raise _err("bad_value", f"{what} must be true or false", node)


def _reject_unknown(node: Mapping, allowed: set, where: str) -> None:
    for key, _ in node.pairs:
        if key.raw not in allowed:
            raise _err("unknown_key", f"unknown key in {where}: {key.raw}", key)


def _parse_vlan(name: str, node) -> VlanConfig:
    m = _want_map(node, f"vlans.{name}")
    _reject_unknown(m, {"vid", "description"}, f"vlans.{name}")
    vid_node = m.get("vid")
    if vid_node is None:
        raise _err("missing_key", f"vlans.{name} is missing required key: vid", m)
    vid = _want_int(vid_node, f"vlans.{name}.vid")
    desc = ""
    if m.get("description") is not None:
        desc = _want_str(m.get("description"), f"vlans.{name}.description")
    return VlanConfig(name=name, vid=vid, description=desc)


def _parse_interface(dp_name: str, port: int, node) -> InterfaceConfig:
    where = f"dps.{dp_name}.interfaces.{port}"
    m = _want_map(node, where)
    _reject_unknown(m, {"name", "description", "native_vlan", "acls_in"}, where)
    nv_node = m.get("native_vlan")
    if nv_node is None:
        raise _err("missing_key", f"{where} is missing required key: native_vlan", m)
    native_vlan = _want_str(nv_node, f"{where}.native_vlan")
    name = _want_str(m.get("name"), f"{where}.name") if m.get("name") is not None else ""
    desc = _want_str(m.get("description"), f"{where}.description") if m.get("description") is not None else ""
    acls_in: tuple = ()
    if m.get("acls_in") is not None:
        seq = _want_seq(m.get("acls_in"), f"{where}.acls_in")
        acls_in = tuple(_want_str(item, f"{where}.acls_in[{i}]") for i, item in enumerate(seq.items))
    return InterfaceConfig(native_vlan=native_vlan, name=name, description=desc, acls_in=acls_in)


def _parse_datapath(name: str, node) -> DatapathConfig:
    where = f"dps.{name}"
    m = _want_map(node, where)
    _reject_unknown(m, {"dp_id", "hardware", "interfaces"}, where)
    dp_id_node = m.get("dp_id")
    if dp_id_node is None:
        raise _err("missing_key", f"{where} is missing required key: dp_id", m)
    dp_id = _want_int(dp_id_node, f"{where}.dp_id")
    hardware = _want_str(m.get("hardware"), f"{where}.hardware") if m.get("hardware") is not None else ""
    interfaces: dict = {}
    if m.get("interfaces") is not None:
        ifmap = _want_map(m.get("interfaces"), f"{where}.interfaces")
        for key, value in ifmap.pairs:
            port = _want_int(key, f"{where}.interfaces key")
            interfaces[port] = _parse_interface(name, port, value)
    return DatapathConfig(name=name, dp_id=dp_id, hardware=hardware, interfaces=interfaces)


def parse_acl_rules(acl_name: str, node, where: str = "acls") -> tuple:
    """Parse one ACL: a sequence of ``- rule: {...}`` wrappers."""
    seq = _want_seq(node, f"{where}.{acl_name}")
    rules = []
    for i, item in enumerate(seq.items):
        slot = f"{where}.{acl_name}[{i}]"
        wrapper = _want_map(item, slot)
        _reject_unknown(wrapper, {"rule"}, slot)
        rule_node = wrapper.get("rule")
        if rule_node is None:
            raise _err("missing_key", f"{slot} must contain a 'rule' mapping", wrapper)
        rm = _want_map(rule_node, f"{slot}.rule")
        _reject_unknown(rm, {"dl_type", "ip_proto", "actions"}, f"{slot}.rule")
        dl_type = _want_int(rm.get("dl_type"), f"{slot}.rule.dl_type") if rm.get("dl_type") is not None else None
        ip_proto = _want_int(rm.get("ip_proto"), f"{slot}.rule.ip_proto") if rm.get("ip_proto") is not None else None
        actions_node = rm.get("actions")
        if actions_node is None:
            raise _err("missing_key", f"{slot}.rule is missing required key: actions", rm)
        am = _want_map(actions_node, f"{slot}.rule.actions")
        _reject_unknown(am, {"allow", "mirror", "redirect"}, f"{slot}.rule.actions")
        allow_node = am.get("allow")
        if allow_node is None:
            raise _err("missing_key", f"{slot}.rule.actions is missing required key: allow", am)
        allow = _want_bool(allow_node, f"{slot}.rule.actions.allow")
        mirror = _want_int(am.get("mirror"), f"{slot}.rule.actions.mirror") if am.get("mirror") is not None else None
        redirect = _want_int(am.get("redirect"), f"{slot}.rule.actions.redirect") if am.get("redirect") is not None else None
        rules.append(AclRuleConfig(dl_type=dl_type, ip_proto=ip_proto, allow=allow,
                                   mirror=mirror, redirect=redirect))
    return tuple(rules)


def parse_config(text) -> FabricConfig:
    """Parse and fully validate a fabric YAML document.

    Raises ConfigParseError for syntax/structure problems and
    ConfigValidationError (carrying the full report) for invariant violations.
    """
    try:
        root = yamlio.load_document(text)
    except YamlSourceError as exc:
        raise ConfigParseError(exc.code, exc.message, exc.line, exc.col) from exc

    top = _want_map(root, "document")
    _reject_unknown(top, {"vlans", "dps", "acls"}, "document")
    for section in ("vlans", "dps"):
        if top.get(section) is None:
            raise _err("missing_section", f"missing section: {section}", top)

    vlans: dict = {}
    for key, value in _want_map(top.get("vlans"), "vlans").pairs:
        vlans[key.raw] = _parse_vlan(key.raw, value)

    dps: dict = {}
    for key, value in _want_map(top.get("dps"), "dps").pairs:
        dps[key.raw] = _parse_datapath(key.raw, value)

    acls: dict = {}
    if top.get("acls") is not None:
        for key, value in _want_map(top.get("acls"), "acls").pairs:
            acls[key.raw] = parse_acl_rules(key.raw, value)

    cfg = FabricConfig(vlans=vlans, dps=dps, acls=acls)
    report = validate(cfg)
    if not report.ok:
        raise ConfigValidationError(report)
    return cfg


# ---------------------------------------------------------------------------
# Validation

def validate(cfg: FabricConfig) -> ValidationReport:
    """Check every model invariant; violations are data, not exceptions."""
    v: list = []

    for name, vlan in cfg.vlans.items():
        if not IDENT_RE.match(name):
            v.append(Violation("invalid_name", f"invalid VLAN name {name!r}", ("vlan", name)))
        if not VID_MIN <= vlan.vid <= VID_MAX:
            v.append(Violation("vid_range", f"vid {vlan.vid} outside 1..4094", ("vlan", name)))
    seen_vids: dict = {}
    for name, vlan in cfg.vlans.items():
        if vlan.vid in seen_vids:
            v.append(Violation("duplicate_vid", f"duplicate vid {vlan.vid}", ("vlan", name)))
        else:
            seen_vids[vlan.vid] = name

    seen_dpids: dict = {}
    for name, dp in cfg.dps.items():
        if not IDENT_RE.match(name):
            v.append(Violation("invalid_name", f"invalid datapath name {name!r}", ("dp", name)))
        if dp.dp_id <= 0:
            v.append(Violation("dpid_range", f"dp_id must be positive, got {dp.dp_id}", ("dp", name)))
        elif dp.dp_id > 0xFFFFFFFFFFFFFFFF:
            v.append(Violation("dpid_range", f"dp_id {dp.dp_id:#x} exceeds 64 bits", ("dp", name)))
        if dp.dp_id in seen_dpids:
            v.append(Violation("duplicate_dpid", f"duplicate dp_id {dp.dp_id:#x}", ("dp", name)))
        else:
            seen_dpids[dp.dp_id] = name
        for port, ifc in dp.interfaces.items():
            path = ("dp", name, "port", port)
            if port <= 0:
                v.append(Violation("port_range", f"port number must be positive, got {port}", path))
            if ifc.native_vlan not in cfg.vlans:
                v.append(Violation("unresolved_vlan",
                                   f"native_vlan {ifc.native_vlan!r} on {name} port {port} "
                                   "does not resolve to a declared VLAN", path))
            for acl_name in ifc.acls_in:
                if acl_name not in cfg.acls:
                    v.append(Violation("unresolved_acl",
                                       f"unresolved ACL {acl_name!r} on {name} port {port}", path))

    for acl_name, rules in cfg.acls.items():
        if not IDENT_RE.match(acl_name):
            v.append(Violation("invalid_name", f"invalid ACL name {acl_name!r}", ("acl", acl_name)))
        referrers = cfg.acl_referrers(acl_name)
        for i, rule in enumerate(rules):
            path = ("acl", acl_name, "rule", i)
            if rule.dl_type is not None and not 0 <= rule.dl_type <= 0xFFFF:
                v.append(Violation("dl_type_range", f"dl_type {rule.dl_type:#x} outside 16 bits", path))
            if rule.ip_proto is not None:
                if not 0 <= rule.ip_proto <= 0xFF:
                    v.append(Violation("ip_proto_range", f"ip_proto {rule.ip_proto} outside 8 bits", path))
                if rule.dl_type not in (ETH_IPV4, ETH_IPV6):
                    v.append(Violation("ip_proto_needs_ip",
                                       "ip_proto requires dl_type 0x800 or 0x86dd", path))
            if rule.redirect is not None and rule.allow:
                v.append(Violation("conflicting_disposition",
                                   "redirect and allow:true cannot both be the terminal disposition",
                                   path))
            for kind, target in (("mirror", rule.mirror), ("redirect", rule.redirect)):
                if target is None:
                    continue
                if target <= 0:
                    v.append(Violation("port_range", f"{kind} port must be positive, got {target}", path))
                    continue
                for dp_name in referrers:
                    if target not in cfg.dps[dp_name].interfaces:
                        v.append(Violation(f"{kind}_port_missing",
                                           f"{kind} port {target} not on datapath {dp_name}", path))

    if not cfg.vlans:
        v.append(Violation("empty_section", "at least one VLAN is required", ("vlans",)))
    if not cfg.dps:
        v.append(Violation("empty_section", "at least one datapath is required", ("dps",)))

    return ValidationReport(violations=tuple(v))


# ---------------------------------------------------------------------------
# Canonical emission

def _fmt_int(value: int, hexa: bool) -> str:
    return f"0x{value:x}" if hexa else str(value)


def emit_acl_rules(name: str, rules, indent: int = 0) -> str:
    """Render one named ACL as a YAML fragment (also used by `sdxctl gen-acl`)."""
    pad = " " * indent
    lines = [f"{pad}{name}:"]
    for rule in rules:
        lines.append(f"{pad}  - rule:")
        if rule.dl_type is not None:
            lines.append(f"{pad}      dl_type: {_fmt_int(rule.dl_type, True)}")
        if rule.ip_proto is not None:
            lines.append(f"{pad}      ip_proto: {rule.ip_proto}")
        lines.append(f"{pad}      actions:")
        lines.append(f"{pad}        allow: {'true' if rule.allow else 'false'}")
        if rule.mirror is not None:
            lines.append(f"{pad}        mirror: {rule.mirror}")
        if rule.redirect is not None:
            lines.append(f"{pad}        redirect: {rule.redirect}")
    return "\n".join(lines) + "\n"


def emit_config(cfg: FabricConfig) -> str:
    """Canonical YAML emission: fixed key order, entries sorted by name.

    parse_config(emit_config(cfg)) is semantically equal to cfg, and a second
    emit of the re-parsed document is byte-identical.
    """
    report = validate(cfg)
    if not report.ok:
        raise ConfigValidationError(report)

    q = yamlio.quote
    lines: list = ["vlans:"]
    for name in sorted(cfg.vlans):
        vlan = cfg.vlans[name]
        lines.append(f"  {name}:")
        lines.append(f"    vid: {vlan.vid}")
        if vlan.description:
            lines.append(f"    description: {q(vlan.description)}")
    lines.append("dps:")
    for name in sorted(cfg.dps):
        dp = cfg.dps[name]
        lines.append(f"  {name}:")
        lines.append(f"    dp_id: {_fmt_int(dp.dp_id, True)}")
        if dp.hardware:
            lines.append(f"    hardware: {q(dp.hardware)}")
        if dp.interfaces:
            lines.append("    interfaces:")
            for port in sorted(dp.interfaces):
                ifc = dp.interfaces[port]
                lines.append(f"      {port}:")
                if ifc.name:
                    lines.append(f"        name: {q(ifc.name)}")
                if ifc.description:
                    lines.append(f"        description: {q(ifc.description)}")
                lines.append(f"        native_vlan: {ifc.native_vlan}")
                if ifc.acls_in:
                    lines.append(f"        acls_in: [{', '.join(ifc.acls_in)}]")
    if cfg.acls:
        lines.append("acls:")
        for name in sorted(cfg.acls):
            lines.append(emit_acl_rules(name, cfg.acls[name], indent=2).rstrip("\n"))
    return "\n".join(lines) + "\n"


def config_fingerprint(cfg: FabricConfig) -> str:
    return hashlib.sha256(emit_config(cfg).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Diffing

@dataclass(frozen=True)
class DeltaEntry:
    """One semantic change, tagged with the (dp, port, acl) path it affects.

    kind is added/removed/changed; value carries the new object (None for
    removals); dps lists datapaths whose compiled tables the change touches.
    """

    kind: str
    path: tuple
    value: object = None
    dps: tuple = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": list(self.path), "dps": list(self.dps)}


@dataclass(frozen=True)
class ConfigDelta:
    entries: tuple = ()

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def affected_datapaths(self) -> tuple:
        out: set = set()
        for e in self.entries:
            out.update(e.dps)
        return tuple(sorted(out))

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries],
                "affected_datapaths": list(self.affected_datapaths())}


def diff_config(old: FabricConfig, new: FabricConfig) -> ConfigDelta:
    """Minimal per-(dp, port, acl) structural delta; diff(c, c) is empty."""
    entries: list = []

    for name in sorted(set(old.vlans) | set(new.vlans)):
        a, b = old.vlans.get(name), new.vlans.get(name)
        if a == b:
            continue
        if a is None:
            entries.append(DeltaEntry("added", ("vlan", name), b))
        elif b is None:
            entries.append(DeltaEntry("removed", ("vlan", name)))
        else:
            entries.append(DeltaEntry("changed", ("vlan", name), b))

    for name in sorted(set(old.acls) | set(new.acls)):
        a, b = old.acls.get(name), new.acls.get(name)
        if a == b:
            continue
        affected = sorted(set(old.acl_referrers(name)) | set(new.acl_referrers(name)))
        if a is None:
            entries.append(DeltaEntry("added", ("acl", name), b, tuple(affected)))
        elif b is None:
            entries.append(DeltaEntry("removed", ("acl", name), None, tuple(affected)))
        else:
            entries.append(DeltaEntry("changed", ("acl", name), b, tuple(affected)))

    for name in sorted(set(old.dps) | set(new.dps)):
        a, b = old.dps.get(name), new.dps.get(name)
        if a == b:
            continue
        if a is None:
            entries.append(DeltaEntry("added", ("dp", name), b, (name,)))
            continue
        if b is None:
            entries.append(DeltaEntry("removed", ("dp", name), None, (name,)))
            continue
        if (a.dp_id, a.hardware) != (b.dp_id, b.hardware):
            entries.append(DeltaEntry("changed", ("dp", name, "attrs"),
                                      (b.dp_id, b.hardware), (name,)))
        for port in sorted(set(a.interfaces) | set(b.interfaces)):
            ia, ib = a.interfaces.get(port), b.interfaces.get(port)
            if ia == ib:
                continue
            if ia is None:
                entries.append(DeltaEntry("added", ("dp", name, "port", port), ib, (name,)))
            elif ib is None:
                entries.append(DeltaEntry("removed", ("dp", name, "port", port), None, (name,)))
            else:
                entries.append(DeltaEntry("changed", ("dp", name, "port", port), ib, (name,)))

    return ConfigDelta(entries=tuple(entries))


def apply_delta(cfg: FabricConfig, delta: ConfigDelta) -> FabricConfig:
    """Apply a diff_config result; apply_delta(a, diff_config(a, b)) == b."""
    vlans = dict(cfg.vlans)
    dps = dict(cfg.dps)
    acls = dict(cfg.acls)
    for e in delta.entries:
        kind, path = e.kind, e.path
        if path[0] == "vlan":
            name = path[1]
            if kind == "removed":
                vlans.pop(name, None)
            else:
                vlans[name] = e.value
        elif path[0] == "acl":
            name = path[1]
            if kind == "removed":
                acls.pop(name, None)
            else:
                acls[name] = e.value
        elif path[0] == "dp" and len(path) == 2:
            name = path[1]
            if kind == "removed":
                dps.pop(name, None)
            else:
                dps[name] = e.value
        elif path[0] == "dp" and path[2] == "attrs":
            name = path[1]
            dp_id, hardware = e.value
            dps[name] = replace(dps[name], dp_id=dp_id, hardware=hardware)
        elif path[0] == "dp" and path[2] == "port":
            name, port = path[1], path[3]
            interfaces = dict(dps[name].interfaces)
            if kind == "removed":
                interfaces.pop(port, None)
            else:
                interfaces[port] = e.value
            dps[name] = replace(dps[name], interfaces=interfaces)
        else:
            raise ValueError(f"unknown delta path {path!r}")
    return FabricConfig(vlans=vlans, dps=dps, acls=acls)
