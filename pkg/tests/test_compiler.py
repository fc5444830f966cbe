import random
from dataclasses import replace

import pytest

from sdx.compiler import (ACL_TABLE, CATCHALL_TAG, L2_TABLE, VLAN_TABLE, CompileError,
                          FlowEntry, FlowTable, PlanError, apply_plan, compile_datapath,
                          cookie_for, decode_cookie, entry_to_flowmod, flowmod_to_entry,
                          format_entry, format_table, match_fields, plan_update)
from sdx.config import AclRuleConfig, FabricConfig, parse_config
from tests.conftest import random_config

# ---------------------------------------------------------------------------
# Test-side oracles, kept independent of the compiler's internals.

def acl_first_match(rules, eth_type, ip_proto):
    """Brute-force first-match interpreter over an interface's concatenated rules.

    Normal form: (output ports in order, continues-to-forwarding flag).
    A miss falls through to normal forwarding (the port catch-all contract).
    """
    for rule in rules:
        if rule.dl_type is not None and rule.dl_type != eth_type:
            continue
        if rule.ip_proto is not None and (ip_proto is None or rule.ip_proto != ip_proto):
            continue
        outputs = [] if rule.mirror is None else [rule.mirror]
        if rule.redirect is not None:
            return tuple(outputs + [rule.redirect]), False
        return tuple(outputs), rule.allow
    return (), True


def table_acl_lookup(entries, in_port, eth_type, ip_proto):
    """Independent table-0 interpreter: highest priority wins, then insertion order."""
    best = None
    for i, e in enumerate(entries):
        if e.table_id != ACL_TABLE:
            continue
        ok = True
        for field, value in e.match:
            if field == "in_port" and value != in_port:
                ok = False
            elif field == "eth_type" and value != eth_type:
                ok = False
            elif field == "ip_proto" and (ip_proto is None or value != ip_proto):
                ok = False
        if ok and (best is None or e.priority > best[1].priority):
            best = (i, e)
    if best is None:
        return None
    outputs = tuple(a[1] for a in best[1].actions if a[0] == "output")
    continues = any(a[0] == "goto" for a in best[1].actions)
    return outputs, continues


PACKET_UNIVERSE = ([(0x800, p) for p in (1, 6, 17, 58)]
                   + [(0x86DD, p) for p in (1, 6, 17, 58)]
                   + [(0x806, None)])


class TestCompileMirrorConfig:
    def test_table0_entries(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        t0 = [e for e in table.entries if e.table_id == ACL_TABLE]

        rules = {(e.priority, e.match): e.actions for e in t0}
        assert rules[(19999, match_fields(in_port=2, eth_type=0x800, ip_proto=1))] == \
            (("output", 4),)
        assert rules[(19998, match_fields(in_port=2, eth_type=0x86DD, ip_proto=58))] == \
            (("output", 4),)
        assert rules[(19997, match_fields(in_port=2))] == (("goto", VLAN_TABLE),)
        for port in (1, 3, 4):
            assert rules[(1, match_fields(in_port=port))] == (("goto", VLAN_TABLE),)
        # port 2 ends in a catch-all ACL rule, so no extra port default
        assert (1, match_fields(in_port=2)) not in rules
        assert len(t0) == 6

    def test_vlan_and_l2_tables(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        t1 = [e for e in table.entries if e.table_id == VLAN_TABLE]
        assert sorted(dict(e.match)["in_port"] for e in t1) == [1, 2, 3, 4]
        assert all(e.actions == (("goto", L2_TABLE),) for e in t1)
        t2 = [e for e in table.entries if e.table_id == L2_TABLE]
        assert len(t2) == 1
        assert t2[0].match == () and t2[0].priority == 0
        assert t2[0].actions == (("controller",),)

    def test_spec_dump_line_present(self, mirror_cfg):
        dump = format_table(compile_datapath(mirror_cfg, "sw1"))
        assert "table=0 prio=19999 in_port=2,eth_type=0x0800,ip_proto=1 -> output:4" in dump

    def test_block_rule_compiles_to_drop(self, mirror_cfg):
        acls = dict(mirror_cfg.acls)
        acls["block"] = (AclRuleConfig(dl_type=0x800, allow=False),)
        dps = dict(mirror_cfg.dps)
        sw1 = dps["sw1"]
        interfaces = dict(sw1.interfaces)
        interfaces[3] = replace(interfaces[3], acls_in=("block",))
        dps["sw1"] = replace(sw1, interfaces=interfaces)
        cfg = FabricConfig(vlans=mirror_cfg.vlans, dps=dps, acls=acls)

        table = compile_datapath(cfg, "sw1")
        entry = next(e for e in table.entries
                     if e.match == match_fields(in_port=3, eth_type=0x800))
        assert entry.actions == ()
        assert "-> drop" in format_entry(entry)

    def test_no_acls_yields_one_catchall_per_port(self, mirror_cfg):
        cfg = FabricConfig(
            vlans=mirror_cfg.vlans,
            dps={"sw1": replace(mirror_cfg.dps["sw1"], interfaces={
                p: replace(i, acls_in=()) for p, i in mirror_cfg.dps["sw1"].interfaces.items()})},
            acls={})
        t0 = [e for e in compile_datapath(cfg, "sw1").entries if e.table_id == ACL_TABLE]
        assert len(t0) == 4
        assert all(e.priority == 1 and e.actions == (("goto", VLAN_TABLE),) for e in t0)

    def test_determinism(self, mirror_cfg):
        a = compile_datapath(mirror_cfg, "sw1")
        b = compile_datapath(mirror_cfg, "sw1")
        assert a == b
        assert format_table(a) == format_table(b)

    def test_unknown_datapath(self, mirror_cfg):
        with pytest.raises(CompileError):
            compile_datapath(mirror_cfg, "sw9")

    def test_fingerprint_tracks_relevant_slice(self, mirror_cfg):
        base = compile_datapath(mirror_cfg, "sw1")
        vlans = {"office": replace(mirror_cfg.vlans["office"], description="x")}
        changed = compile_datapath(
            FabricConfig(vlans=vlans, dps=mirror_cfg.dps, acls=mirror_cfg.acls), "sw1")
        assert changed.entries == base.entries
        assert changed.fingerprint != base.fingerprint


class TestFirstMatchFidelity:
    def test_mirror_config_exhaustive(self, mirror_cfg):
        self._check_config(mirror_cfg)

    def test_random_configs_exhaustive(self):
        rng = random.Random(31337)
        for _ in range(40):
            self._check_config(random_config(rng))

    def _check_config(self, cfg):
        for dp_name, dp in cfg.dps.items():
            table = compile_datapath(cfg, dp_name)
            for port, ifc in dp.interfaces.items():
                rules = [r for acl in ifc.acls_in for r in cfg.acls[acl]]
                for eth_type, ip_proto in PACKET_UNIVERSE:
                    expected = acl_first_match(rules, eth_type, ip_proto)
                    got = table_acl_lookup(table.entries, port, eth_type, ip_proto)
                    assert got == expected, (dp_name, port, eth_type, ip_proto)


class TestCookieProvenance:
    def test_every_acl_entry_decodes(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        names = list(mirror_cfg.acls) + [CATCHALL_TAG]
        expected = {
            19999: ("mirror", 0), 19998: ("mirror", 1), 19997: ("allow-all", 0),
        }
        for e in table.entries:
            if e.table_id != ACL_TABLE:
                continue
            got = decode_cookie(e.cookie, names)
            if e.priority in expected:
                assert got == expected[e.priority]
            else:
                assert got == (CATCHALL_TAG, dict(e.match)["in_port"])

    def test_foreign_cookie_not_decoded(self):
        assert decode_cookie(0x1234, ["mirror"]) is None
        assert decode_cookie(cookie_for("mirror", 1), ["allow-all"]) is None


class TestPlanUpdate:
    def test_identity_empty(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        assert plan_update(table, table).is_empty

    def test_add_one_block_rule(self, mirror_cfg):
        current = compile_datapath(mirror_cfg, "sw1")
        acls = dict(mirror_cfg.acls)
        acls["block"] = (AclRuleConfig(dl_type=0x800, allow=False),)
        dps = dict(mirror_cfg.dps)
        interfaces = dict(dps["sw1"].interfaces)
        interfaces[3] = replace(interfaces[3], acls_in=("block",))
        dps["sw1"] = replace(dps["sw1"], interfaces=interfaces)
        target = compile_datapath(FabricConfig(vlans=mirror_cfg.vlans, dps=dps, acls=acls), "sw1")

        plan = plan_update(current, target)
        assert plan.n_added == 1
        assert plan.n_removed == 0
        assert [s.kind for s in plan.steps] == ["add", "barrier"]

    def test_priority_change_is_delete_strict_plus_add(self, mirror_cfg):
        current = compile_datapath(mirror_cfg, "sw1")
        entries = list(current.entries)
        i = next(idx for idx, e in enumerate(entries) if e.priority == 19999)
        entries[i] = replace(entries[i], priority=18000)
        target = FlowTable(dp_id=current.dp_id, entries=tuple(entries))

        plan = plan_update(current, target)
        assert plan.n_removed == 1 and plan.n_added == 1
        kinds = [s.kind for s in plan.steps]
        assert kinds == ["delete_strict", "add", "barrier"]
        assert kinds.index("delete_strict") < kinds.index("add")

    def test_dp_id_mismatch(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        other = FlowTable(dp_id=table.dp_id + 1, entries=table.entries)
        with pytest.raises(PlanError):
            plan_update(table, other)

    def test_delta_soundness_random_perturbations(self, mirror_cfg):
        rng = random.Random(4242)
        base = compile_datapath(mirror_cfg, "sw1")
        for _ in range(60):
            entries = list(base.entries)
            rng.shuffle(entries)
            entries = entries[:rng.randrange(1, len(entries) + 1)]
            entries = [replace(e, priority=e.priority + rng.randrange(3),
                               cookie=rng.randrange(1 << 64)) for e in entries]
            dedup = {e.key: e for e in entries}
            target = FlowTable(dp_id=base.dp_id, entries=tuple(dedup.values()))
            plan = plan_update(base, target)
            assert apply_plan(base, plan).canonical_entries() == target.canonical_entries()

    def test_delta_soundness_config_pairs(self):
        rng = random.Random(777)
        for _ in range(30):
            a, b = random_config(rng), random_config(rng)
            shared = sorted(set(a.dps) & set(b.dps))
            for dp_name in shared:
                dps_b = dict(b.dps)
                dps_b[dp_name] = replace(dps_b[dp_name], dp_id=a.dps[dp_name].dp_id)
                b_aligned = FabricConfig(vlans=b.vlans, dps=dps_b, acls=b.acls)
                cur = compile_datapath(a, dp_name)
                tgt = compile_datapath(b_aligned, dp_name)
                plan = plan_update(cur, tgt)
                assert apply_plan(cur, plan).canonical_entries() == tgt.canonical_entries()


class TestWireConversion:
    def test_entry_roundtrip_through_flowmod(self, mirror_cfg):
        table = compile_datapath(mirror_cfg, "sw1")
        for entry in table.entries:
            fm = entry_to_flowmod(entry, xid=1)
            assert flowmod_to_entry(fm) == entry
