"""Lowers a validated FabricConfig into per-datapath flow tables.

Three-table pipeline: table 0 applies port-ingress ACLs (block, mirror,
redirect, allow), table 1 maps each port to its native VLAN and continues,
table 2 does learned L2 forwarding with a controller miss entry. Also plans
minimal FlowMod deltas between table versions for runtime rule changes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import ofproto as of
from .config import ConfigValidationError, FabricConfig, validate
from .ofproto import OXM_FIELDS

ACL_TABLE = 0
VLAN_TABLE = 1
L2_TABLE = 2

ACL_PRIORITY_BASE = 20000
CATCHALL_PRIORITY = 1
VLAN_PRIORITY = 10
L2_LEARN_PRIORITY = 100
L2_MISS_PRIORITY = 0

_FIELD_ORDER = {name: num for name, (num, _) in OXM_FIELDS.items()}

# cookie layout: bit 63 = ours, bits 62..16 = 47-bit name hash, bits 15..0 = rule index
COOKIE_NS_BIT = 1 << 63
_HASH_MASK = (1 << 47) - 1
CATCHALL_TAG = "@port-default"
VLAN_TAG = "@vlan-assign"
L2_MISS_TAG = "@l2-miss"
L2_LEARN_TAG = "@l2-learn"
PROVENANCE_TAGS = (CATCHALL_TAG, VLAN_TAG, L2_MISS_TAG, L2_LEARN_TAG)


class CompileError(Exception):
    pass


class PlanError(Exception):
    pass


def _fnv47(name: str) -> int:
    h = 0xCBF29CE484222325
    for b in name.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h & _HASH_MASK


def cookie_for(name: str, index: int) -> int:
    return COOKIE_NS_BIT | (_fnv47(name) << 16) | (index & 0xFFFF)


def decode_cookie(cookie: int, names) -> tuple | None:
    """Recover the (name, rule index) provenance a cookie encodes."""
    if not cookie & COOKIE_NS_BIT:
        return None
    h = (cookie >> 16) & _HASH_MASK
    for name in names:
        if _fnv47(name) == h:
            return name, cookie & 0xFFFF
    return None


L2_LEARN_COOKIE = cookie_for(L2_LEARN_TAG, 0)


def match_fields(**fields) -> tuple:
    """Canonical FlowEntry match: (field, value) pairs in OXM field order."""
    for name in fields:
        if name not in _FIELD_ORDER:
            raise CompileError(f"unsupported match field {name!r}")
    return tuple(sorted(((k, v) for k, v in fields.items() if v is not None),
                        key=lambda kv: _FIELD_ORDER[kv[0]]))


@dataclass(frozen=True)
class FlowEntry:
    table_id: int
    priority: int
    match: tuple  # canonical (field, value) pairs
    actions: tuple  # ordered ("output", port) | ("goto", table) | ("controller",)
    cookie: int = 0

    @property
    def key(self) -> tuple:
        return (self.table_id, self.priority, self.match)


@dataclass(frozen=True)
class FlowTable:
    dp_id: int
    entries: tuple
    fingerprint: str = ""

    def canonical_entries(self) -> tuple:
        return tuple(sorted(self.entries, key=_entry_sort_key))


def _entry_sort_key(e: FlowEntry):
    return (e.table_id, -e.priority, tuple((k, str(v)) for k, v in e.match))


def _rule_actions(rule) -> tuple:
    copy = (("output", rule.mirror),) if rule.mirror is not None else ()
    if rule.redirect is not None:
        return copy + (("output", rule.redirect),)
    if rule.allow:
        return copy + (("goto", VLAN_TABLE),)
    return copy  # no continuation: original frame is dropped


def _dp_slice_fingerprint(cfg: FabricConfig, dp_name: str) -> str:
    """Hash of the config slice a datapath's table depends on."""
    from .config import emit_config  # local import to avoid cycle at module load

    dp = cfg.dps[dp_name]
    acl_names = sorted({a for ifc in dp.interfaces.values() for a in ifc.acls_in})
    vlan_names = sorted({ifc.native_vlan for ifc in dp.interfaces.values()})
    slice_cfg = FabricConfig(
        vlans={n: cfg.vlans[n] for n in vlan_names if n in cfg.vlans},
        dps={dp_name: dp},
        acls={n: cfg.acls[n] for n in acl_names if n in cfg.acls})
    return hashlib.sha256(emit_config(slice_cfg).encode("utf-8")).hexdigest()[:16]


def compile_datapath(cfg: FabricConfig, dp_name: str) -> FlowTable:
    """Deterministically compile one datapath's three-table pipeline."""
    if dp_name not in cfg.dps:
        raise CompileError(f"unknown datapath {dp_name!r}")
    report = validate(cfg)
    if not report.ok:
        raise ConfigValidationError(report)
    dp = cfg.dps[dp_name]

    entries: list = []
    for port in sorted(dp.interfaces):
        ifc = dp.interfaces[port]
        k = 0
        has_catchall_rule = False
        for acl_name in ifc.acls_in:
            for idx, rule in enumerate(cfg.acls[acl_name]):
                k += 1
                for kind, target in (("mirror", rule.mirror), ("redirect", rule.redirect)):
                    if target is not None and target not in dp.interfaces:
                        raise CompileError(f"{kind} port {target} not on datapath {dp_name}")
                if rule.match_is_empty:
                    has_catchall_rule = True
                entries.append(FlowEntry(
                    table_id=ACL_TABLE,
                    priority=ACL_PRIORITY_BASE - k,
                    match=match_fields(in_port=port, eth_type=rule.dl_type,
                                       ip_proto=rule.ip_proto),
                    actions=_rule_actions(rule),
                    cookie=cookie_for(acl_name, idx)))
        if not has_catchall_rule:
            entries.append(FlowEntry(
                table_id=ACL_TABLE, priority=CATCHALL_PRIORITY,
                match=match_fields(in_port=port),
                actions=(("goto", VLAN_TABLE),),
                cookie=cookie_for(CATCHALL_TAG, port)))

    for port in sorted(dp.interfaces):
        entries.append(FlowEntry(
            table_id=VLAN_TABLE, priority=VLAN_PRIORITY,
            match=match_fields(in_port=port),
            actions=(("goto", L2_TABLE),),
            cookie=cookie_for(VLAN_TAG, port)))

    entries.append(FlowEntry(
        table_id=L2_TABLE, priority=L2_MISS_PRIORITY, match=(),
        actions=(("controller",),),
        cookie=cookie_for(L2_MISS_TAG, 0)))

    return FlowTable(dp_id=dp.dp_id, entries=tuple(entries),
                     fingerprint=_dp_slice_fingerprint(cfg, dp_name))


# ---------------------------------------------------------------------------
# Update planning

@dataclass(frozen=True)
class PlanStep:
    kind: str  # "add" | "delete_strict" | "barrier"
    entry: FlowEntry | None = None


@dataclass(frozen=True)
class FlowUpdatePlan:
    dp_id: int
    steps: tuple = ()

    @property
    def is_empty(self) -> bool:
        return not self.steps

    @property
    def n_added(self) -> int:
        return sum(1 for s in self.steps if s.kind == "add")

    @property
    def n_removed(self) -> int:
        return sum(1 for s in self.steps if s.kind == "delete_strict")


def plan_update(current: FlowTable, target: FlowTable) -> FlowUpdatePlan:
    """Minimal strict-delete/add plan; plan_update(t, t) is empty."""
    if current.dp_id != target.dp_id:
        raise PlanError(f"dp_id mismatch: {current.dp_id:#x} vs {target.dp_id:#x}")
    cur = {e.key: e for e in current.entries}
    tgt = {e.key: e for e in target.entries}

    deletes = [cur[k] for k in cur if k not in tgt or cur[k] != tgt[k]]
    adds = [tgt[k] for k in tgt if k not in cur or tgt[k] != cur[k]]
    steps = [PlanStep("delete_strict", e) for e in sorted(deletes, key=_entry_sort_key)]
    steps += [PlanStep("add", e) for e in sorted(adds, key=_entry_sort_key)]
    if steps:
        steps.append(PlanStep("barrier"))
    return FlowUpdatePlan(dp_id=target.dp_id, steps=tuple(steps))


def apply_plan(table: FlowTable, plan: FlowUpdatePlan) -> FlowTable:
    """Pure application of a plan; used to check delta soundness."""
    if table.dp_id != plan.dp_id:
        raise PlanError("dp_id mismatch")
    entries = {e.key: e for e in table.entries}
    for step in plan.steps:
        if step.kind == "delete_strict":
            entries.pop(step.entry.key, None)
        elif step.kind == "add":
            entries[step.entry.key] = step.entry
    return FlowTable(dp_id=table.dp_id,
                     entries=tuple(sorted(entries.values(), key=_entry_sort_key)))


# ---------------------------------------------------------------------------
# Textual dump and wire conversion

def _fmt_match_value(field: str, value) -> str:
    if field == "eth_type":
        return f"0x{value:04x}"
    return str(value)


def format_entry(e: FlowEntry) -> str:
    match = ",".join(f"{k}={_fmt_match_value(k, v)}" for k, v in e.match) or "*"
    if not e.actions:
        acts = "drop"
    else:
        parts = []
        for act in e.actions:
            if act[0] == "output":
                parts.append(f"output:{act[1]}")
            elif act[0] == "goto":
                parts.append(f"goto:{act[1]}")
            else:
                parts.append("output:CONTROLLER")
        acts = ",".join(parts)
    return f"table={e.table_id} prio={e.priority} {match} -> {acts}"


def format_table(table: FlowTable) -> str:
    return "\n".join(format_entry(e) for e in table.canonical_entries()) + "\n"


def entry_to_flowmod(entry: FlowEntry, command: int = of.OFPFC_ADD, xid: int = 0,
                     idle_timeout: int = 0) -> of.FlowMod:
    instructions: tuple = ()
    if command in (of.OFPFC_ADD, of.OFPFC_MODIFY, of.OFPFC_MODIFY_STRICT):
        outputs = []
        goto = None
        for act in entry.actions:
            if act[0] == "output":
                outputs.append(of.Output(act[1]))
            elif act[0] == "controller":
                outputs.append(of.Output(of.OFPP_CONTROLLER, max_len=of.OFPCML_NO_BUFFER))
            elif act[0] == "goto":
                goto = of.GotoTable(act[1])
        parts = []
        if outputs:
            parts.append(of.ApplyActions(actions=tuple(outputs)))
        if goto is not None:
            parts.append(goto)
        instructions = tuple(parts)
    return of.FlowMod(xid=xid, table_id=entry.table_id, command=command,
                      priority=entry.priority, cookie=entry.cookie,
                      match=of.Match.build(**dict(entry.match)),
                      instructions=instructions, idle_timeout=idle_timeout)


def flowmod_to_entry(fm: of.FlowMod) -> FlowEntry:
    actions: list = []
    for inst in fm.instructions:
        if isinstance(inst, of.ApplyActions):
            for act in inst.actions:
                if act.port == of.OFPP_CONTROLLER:
                    actions.append(("controller",))
                else:
                    actions.append(("output", act.port))
        elif isinstance(inst, of.GotoTable):
            actions.append(("goto", inst.table_id))
    return FlowEntry(table_id=fm.table_id, priority=fm.priority,
                     match=match_fields(**fm.match.to_dict()),
                     actions=tuple(actions), cookie=fm.cookie)
