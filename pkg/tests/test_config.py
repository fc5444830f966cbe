import random
from dataclasses import replace

import pytest

from sdx.config import (AclRuleConfig, ConfigParseError, ConfigValidationError,
                        DatapathConfig, FabricConfig, InterfaceConfig, VlanConfig,
                        apply_delta, diff_config, emit_config, parse_config, validate)
from tests.conftest import random_config


def minimal_cfg() -> FabricConfig:
    return FabricConfig(
        vlans={"office": VlanConfig(name="office", vid=100)},
        dps={"sw1": DatapathConfig(name="sw1", dp_id=1,
                                   interfaces={1: InterfaceConfig(native_vlan="office")})})


class TestParse:
    def test_mirror_document(self, mirror_cfg):
        assert set(mirror_cfg.vlans) == {"office"}
        office = mirror_cfg.vlans["office"]
        assert office.vid == 100
        assert office.description == "Research network"

        sw1 = mirror_cfg.dps["sw1"]
        assert sw1.dp_id == 0x1
        assert sw1.hardware == "Open vSwitch"
        assert sorted(sw1.interfaces) == [1, 2, 3, 4]
        assert [sw1.interfaces[p].name for p in (1, 2, 3, 4)] == ["AS1", "AS2", "AS3", "AS4"]
        assert sw1.interfaces[2].acls_in == ("mirror", "allow-all")
        assert sw1.interfaces[1].acls_in == ()

        mirror = mirror_cfg.acls["mirror"]
        assert len(mirror) == 2
        assert mirror[0] == AclRuleConfig(dl_type=0x800, ip_proto=1, allow=False, mirror=4)
        assert mirror[1] == AclRuleConfig(dl_type=0x86DD, ip_proto=58, allow=False, mirror=4)
        assert mirror_cfg.acls["allow-all"] == (AclRuleConfig(allow=True),)

    def test_missing_dps_section(self):
        with pytest.raises(ConfigParseError) as ei:
            parse_config("vlans:\n  office:\n    vid: 100\n")
        assert ei.value.code == "missing_section"
        assert "missing section: dps" in ei.value.message

    def test_duplicate_vid(self):
        doc = ("vlans:\n"
               "  a:\n    vid: 100\n"
               "  b:\n    vid: 100\n"
               "dps:\n"
               "  sw1:\n    dp_id: 0x1\n    interfaces:\n      1:\n        native_vlan: a\n")
        with pytest.raises(ConfigValidationError) as ei:
            parse_config(doc)
        assert any("duplicate vid 100" in v.message for v in ei.value.report.violations)

    def test_unknown_key_rejected(self):
        doc = ("vlans:\n  office:\n    vid: 100\n    color: blue\n"
               "dps:\n  sw1:\n    dp_id: 1\n")
        with pytest.raises(ConfigParseError) as ei:
            parse_config(doc)
        assert ei.value.code == "unknown_key"
        assert "color" in ei.value.message

    def test_syntax_error_has_position(self):
        with pytest.raises(ConfigParseError) as ei:
            parse_config("vlans:\n  office\n    vid: 100\n")
        assert ei.value.code == "yaml_syntax"
        assert ei.value.line is not None

    def test_hex_and_decimal_dp_id(self):
        base = ("vlans:\n  v:\n    vid: 5\ndps:\n  sw1:\n    dp_id: {}\n"
                "    interfaces:\n      1:\n        native_vlan: v\n")
        assert parse_config(base.format("0x1f")).dps["sw1"].dp_id == 31
        assert parse_config(base.format("31")).dps["sw1"].dp_id == 31

    def test_anchor_and_alias_rejected(self):
        doc = ("vlans:\n  office: &a\n    vid: 100\n  lab: *a\n"
               "dps:\n  sw1:\n    dp_id: 1\n")
        with pytest.raises(ConfigParseError):
            parse_config(doc)

    def test_duplicate_mapping_key_rejected(self):
        doc = ("vlans:\n  office:\n    vid: 100\n  office:\n    vid: 101\n"
               "dps:\n  sw1:\n    dp_id: 1\n")
        with pytest.raises(ConfigParseError) as ei:
            parse_config(doc)
        assert ei.value.code == "duplicate_key"

    def test_boolean_spellings(self):
        doc = ("vlans:\n  v:\n    vid: 1\n"
               "dps:\n  sw1:\n    dp_id: 1\n    interfaces:\n"
               "      1:\n        native_vlan: v\n        acls_in: [a]\n"
               "acls:\n  a:\n    - rule:\n        actions:\n          allow: {}\n")
        for spelling, expected in (("True", True), ("true", True),
                                   ("False", False), ("false", False)):
            cfg = parse_config(doc.format(spelling))
            assert cfg.acls["a"][0].allow is expected
        with pytest.raises(ConfigParseError):
            parse_config(doc.format("yes"))


class TestValidate:
    def test_mirror_config_clean(self, mirror_cfg):
        assert validate(mirror_cfg).ok

    def test_mirror_port_missing(self, mirror_cfg):
        bad_rule = replace(mirror_cfg.acls["mirror"][0], mirror=9)
        acls = dict(mirror_cfg.acls)
        acls["mirror"] = (bad_rule,) + mirror_cfg.acls["mirror"][1:]
        report = validate(FabricConfig(vlans=mirror_cfg.vlans, dps=mirror_cfg.dps, acls=acls))
        assert any("mirror port 9 not on datapath sw1" in v.message for v in report.violations)

    def test_unresolved_acl(self, mirror_cfg):
        dps = dict(mirror_cfg.dps)
        sw1 = dps["sw1"]
        interfaces = dict(sw1.interfaces)
        interfaces[3] = replace(interfaces[3], acls_in=("quarantine",))
        dps["sw1"] = replace(sw1, interfaces=interfaces)
        report = validate(FabricConfig(vlans=mirror_cfg.vlans, dps=dps, acls=mirror_cfg.acls))
        assert any(v.code == "unresolved_acl" and "unresolved ACL" in v.message
                   for v in report.violations)

    @pytest.mark.parametrize("mutate, code", [
        (lambda c: _set_vlan_vid(c, 0), "vid_range"),
        (lambda c: _set_vlan_vid(c, 4095), "vid_range"),
        (lambda c: _set_dp_id(c, 0), "dpid_range"),
        (lambda c: _set_native_vlan(c, "ghost"), "unresolved_vlan"),
        (lambda c: _set_rule(c, AclRuleConfig(ip_proto=6, allow=True)), "ip_proto_needs_ip"),
        (lambda c: _set_rule(c, AclRuleConfig(dl_type=0x806, ip_proto=6, allow=True)),
         "ip_proto_needs_ip"),
        (lambda c: _set_rule(c, AclRuleConfig(allow=True, redirect=1)), "conflicting_disposition"),
        (lambda c: FabricConfig(vlans={}, dps=c.dps, acls=c.acls), "empty_section"),
    ])
    def test_each_invariant_violation_detected(self, mutate, code):
        report = validate(mutate(_acl_cfg()))
        assert any(v.code == code for v in report.violations), report

    def test_random_configs_validate_clean(self):
        rng = random.Random(7)
        for _ in range(50):
            assert validate(random_config(rng)).ok


def _acl_cfg() -> FabricConfig:
    cfg = minimal_cfg()
    dps = {"sw1": replace(cfg.dps["sw1"], interfaces={
        1: InterfaceConfig(native_vlan="office", acls_in=("a",))})}
    return FabricConfig(vlans=cfg.vlans, dps=dps,
                        acls={"a": (AclRuleConfig(allow=True),)})


def _set_vlan_vid(cfg, vid):
    return FabricConfig(vlans={"office": VlanConfig(name="office", vid=vid)},
                        dps=cfg.dps, acls=cfg.acls)


def _set_dp_id(cfg, dp_id):
    return FabricConfig(vlans=cfg.vlans,
                        dps={"sw1": replace(cfg.dps["sw1"], dp_id=dp_id)}, acls=cfg.acls)


def _set_native_vlan(cfg, vlan):
    sw1 = cfg.dps["sw1"]
    interfaces = {p: replace(i, native_vlan=vlan) for p, i in sw1.interfaces.items()}
    return FabricConfig(vlans=cfg.vlans,
                        dps={"sw1": replace(sw1, interfaces=interfaces)}, acls=cfg.acls)


def _set_rule(cfg, rule):
    return FabricConfig(vlans=cfg.vlans, dps=cfg.dps, acls={"a": (rule,)})


class TestEmit:
    def test_mirror_roundtrip_semantic(self, mirror_cfg):
        assert parse_config(emit_config(mirror_cfg)) == mirror_cfg

    def test_minimal_second_emit_byte_identical(self):
        cfg = minimal_cfg()
        first = emit_config(cfg)
        second = emit_config(parse_config(first))
        assert first == second

    def test_parse_emit_fixpoint_random(self):
        rng = random.Random(20260808)
        for _ in range(100):
            cfg = random_config(rng)
            doc = emit_config(cfg)
            cfg2 = parse_config(doc)
            assert cfg2 == cfg
            assert emit_config(cfg2) == doc

    def test_dp_id_emitted_as_hex(self, mirror_cfg):
        assert "dp_id: 0x1" in emit_config(mirror_cfg)

    def test_booleans_emitted_lowercase(self, mirror_cfg):
        doc = emit_config(mirror_cfg)
        assert "allow: false" in doc and "allow: true" in doc
        assert "False" not in doc and "True" not in doc

    def test_comments_dropped(self, mirror_yaml, mirror_cfg):
        assert "#" in mirror_yaml
        assert "#" not in emit_config(mirror_cfg)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigValidationError):
            emit_config(FabricConfig())


class TestDiff:
    def test_identity_empty(self, mirror_cfg):
        assert diff_config(mirror_cfg, mirror_cfg).is_empty

    def test_interface_acl_change_single_path(self, mirror_cfg):
        dps = dict(mirror_cfg.dps)
        sw1 = dps["sw1"]
        interfaces = dict(sw1.interfaces)
        interfaces[3] = replace(interfaces[3], acls_in=("allow-all",))
        dps["sw1"] = replace(sw1, interfaces=interfaces)
        new = FabricConfig(vlans=mirror_cfg.vlans, dps=dps, acls=mirror_cfg.acls)

        delta = diff_config(mirror_cfg, new)
        assert len(delta.entries) == 1
        entry = delta.entries[0]
        assert entry.kind == "changed"
        assert entry.path == ("dp", "sw1", "port", 3)
        assert delta.affected_datapaths() == ("sw1",)

    def test_vlan_description_change_affects_no_dp(self, mirror_cfg):
        vlans = {"office": replace(mirror_cfg.vlans["office"], description="renamed")}
        new = FabricConfig(vlans=vlans, dps=mirror_cfg.dps, acls=mirror_cfg.acls)
        delta = diff_config(mirror_cfg, new)
        assert [e.path for e in delta.entries] == [("vlan", "office")]
        assert delta.affected_datapaths() == ()

    def test_acl_change_tags_referring_dps(self, mirror_cfg):
        acls = dict(mirror_cfg.acls)
        acls["mirror"] = acls["mirror"][:1]
        new = FabricConfig(vlans=mirror_cfg.vlans, dps=mirror_cfg.dps, acls=acls)
        delta = diff_config(mirror_cfg, new)
        assert delta.affected_datapaths() == ("sw1",)

    def test_apply_delta_roundtrip_random(self):
        rng = random.Random(99)
        for _ in range(60):
            a, b = random_config(rng), random_config(rng)
            assert apply_delta(a, diff_config(a, b)) == b
            assert apply_delta(a, diff_config(a, a)) == a
