"""Admin API: roles, staged/active isolation, CRUD, apply, stats, status."""

import json
import time
import urllib.error
import urllib.request
from dataclasses import replace
from pathlib import Path

import pytest

from sdx.api import PERMISSIONS, User, UserStore
from sdx.compiler import compile_datapath
from sdx.config import parse_config
from sdx.service import SdxService
from sdx.sim import SimFabric, parse_topology
from tests.test_stats import check_exposition

DATA = Path(__file__).parent / "data"

TOKENS = {"admin": "tok-admin", "moderator": "tok-mod", "customer": "tok-cust",
          "anon": None}


def call(base, token, method, path, body=None, content_type="application/json"):
    data = None
    if body is not None:
        data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method)
    if token:
        req.add_header("Authorization", f"Bearer {token}")
    if data is not None:
        req.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            raw = resp.read().decode()
            ctype = resp.headers.get("Content-Type", "")
            payload = json.loads(raw) if "json" in ctype and raw else raw
            return resp.status, payload
    except urllib.error.HTTPError as exc:
        raw = exc.read().decode()
        try:
            return exc.code, json.loads(raw)
        except json.JSONDecodeError:
            return exc.code, raw


@pytest.fixture
def service(mirror_cfg):
    users = UserStore([
        User(username="root", role="admin", token="tok-admin"),
        User(username="mod", role="moderator", token="tok-mod"),
        User(username="cust1", role="customer", token="tok-cust", ports=(("sw1", 1),)),
    ])
    svc = SdxService(mirror_cfg, users, control_port=0, admin_port=0, metrics_port=0,
                     poll_interval=300, echo_interval=0.5)
    svc.start()
    yield svc
    svc.stop()


@pytest.fixture
def base(service):
    return f"http://{service.admin_server.host}:{service.admin_server.port}"


@pytest.fixture
def fabric(service):
    spec = parse_topology((DATA / "two_node.yaml").read_text())
    spec = replace(spec, flows=())
    fab = SimFabric(spec, service.controller.host, service.controller.port)
    fab.start(timeout=10)
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline and service.controller.steady_datapaths() != ["sw1"]:
        time.sleep(0.02)
    assert service.controller.steady_datapaths() == ["sw1"]
    yield fab
    fab.stop()


# Every route group exercised with a representative path per verb.
MATRIX_CASES = [
    ("GET", "/vlans", "config_read"),
    ("GET", "/vlans/office", "config_read"),
    ("GET", "/datapaths", "config_read"),
    ("GET", "/datapaths/sw1", "config_read"),
    ("GET", "/interfaces", "config_read"),
    ("GET", "/datapaths/sw1/interfaces/1", "config_read"),
    ("GET", "/acls", "config_read"),
    ("GET", "/acls/mirror", "config_read"),
    ("GET", "/config", "config_read"),
    ("GET", "/config/yaml", "config_read"),
    ("POST", "/config/validate", "config_read"),
    ("POST", "/vlans", "config_write"),
    ("PUT", "/vlans/ghost", "config_write"),
    ("DELETE", "/vlans/ghost", "config_write"),
    ("POST", "/datapaths", "config_write"),
    ("PUT", "/datapaths/ghost", "config_write"),
    ("DELETE", "/datapaths/ghost", "config_write"),
    ("POST", "/datapaths/ghost/interfaces", "config_write"),
    ("PUT", "/datapaths/ghost/interfaces/9", "config_write"),
    ("DELETE", "/datapaths/ghost/interfaces/9", "config_write"),
    ("POST", "/acls", "config_write"),
    ("PUT", "/acls/ghost", "config_write"),
    ("DELETE", "/acls/ghost", "config_write"),
    ("PUT", "/config/yaml", "config_write"),
    ("GET", "/users", "users"),
    ("POST", "/users", "users"),
    ("GET", "/users/ghost", "users"),
    ("PUT", "/users/ghost", "users"),
    ("DELETE", "/users/ghost", "users"),
    ("POST", "/config/apply", "apply"),
    ("GET", "/status", "status"),
    ("GET", "/stats/ports?dp=sw1&port=1", "stats"),
    ("GET", "/me", "me"),
]


class TestRoleMatrix:
    @pytest.mark.parametrize("identity", ["admin", "moderator", "customer", "anon"])
    def test_exhaustive(self, base, identity):
        token = TOKENS[identity]
        for method, path, group in MATRIX_CASES:
            status, _ = call(base, token, method, path)
            if identity == "anon":
                assert status == 401, (method, path, status)
            elif identity in PERMISSIONS[(group, method)]:
                assert status != 401 and status != 403 or \
                    (group == "stats" and identity == "customer"), (method, path, status)
            else:
                assert status == 403, (method, path, status)

    def test_matrix_is_total(self):
        for _, _, group in MATRIX_CASES:
            for method in ("GET", "POST", "PUT", "DELETE"):
                if any(m == method and g == group for m, _, g in MATRIX_CASES):
                    assert (group, method) in PERMISSIONS

    def test_customer_cross_port_always_403(self, base, fabric):
        status, _ = call(base, TOKENS["customer"], "GET", "/stats/ports?dp=sw1&port=2")
        assert status == 403

    def test_customer_own_port_allowed(self, base, fabric):
        status, _ = call(base, TOKENS["customer"], "GET", "/stats/ports?dp=sw1&port=1")
        assert status == 204  # authorized; no samples yet


class TestCrud:
    def test_vlan_lifecycle(self, base):
        status, body = call(base, "tok-admin", "POST", "/vlans",
                            {"name": "lab", "vid": 200, "description": "lab net"})
        assert status == 201 and body["vid"] == 200

        status, body = call(base, "tok-admin", "GET", "/vlans/lab")
        assert status == 200
        assert body["staged"]["vid"] == 200
        assert body["active"] is None  # not applied yet

        status, _ = call(base, "tok-admin", "POST", "/vlans", {"name": "lab", "vid": 300})
        assert status == 409

        status, _ = call(base, "tok-admin", "PUT", "/vlans/lab",
                         {"vid": 201, "description": "lab net"})
        assert status == 200

        status, _ = call(base, "tok-admin", "DELETE", "/vlans/lab")
        assert status == 200
        status, _ = call(base, "tok-admin", "DELETE", "/vlans/lab")
        assert status == 404

    def test_delete_referenced_vlan_409(self, base):
        status, body = call(base, "tok-admin", "DELETE", "/vlans/office")
        assert status == 409
        assert body["error"]["code"] == "integrity_violation"

    def test_invalid_vid_422(self, base):
        status, body = call(base, "tok-admin", "POST", "/vlans", {"name": "bad", "vid": 9999})
        assert status == 422
        assert body["error"]["code"] == "invariant_violation"

    def test_put_identity_no_staged_diff(self, base, service):
        _, before = call(base, "tok-admin", "GET", "/config")
        status, _ = call(base, "tok-admin", "PUT", "/vlans/office",
                         {"vid": 100, "description": "Research network"})
        assert status == 200
        _, after = call(base, "tok-admin", "GET", "/config")
        assert before["staged_fingerprint"] == after["staged_fingerprint"]
        assert not after["dirty"]

    def test_interface_crud(self, base):
        status, body = call(base, "tok-admin", "POST", "/datapaths/sw1/interfaces",
                            {"port": 5, "name": "AS5", "native_vlan": "office"})
        assert status == 201 and body["port"] == 5
        status, _ = call(base, "tok-admin", "DELETE", "/datapaths/sw1/interfaces/5")
        assert status == 200

    def test_unresolved_acl_rejected(self, base):
        status, body = call(base, "tok-admin", "PUT", "/datapaths/sw1/interfaces/3",
                            {"native_vlan": "office", "acls_in": ["quarantine"]})
        assert status == 422

    def test_user_crud(self, base, service):
        status, body = call(base, "tok-admin", "POST", "/users",
                            {"username": "cust2", "role": "customer",
                             "ports": [{"dp": "sw1", "port": 3}]})
        assert status == 201 and body["token"]
        token2 = body["token"]
        status, me = call(base, token2, "GET", "/me")
        assert status == 200 and me["username"] == "cust2"
        status, _ = call(base, "tok-admin", "DELETE", "/users/cust2")
        assert status == 200
        status, _ = call(base, token2, "GET", "/me")
        assert status == 401


class TestStagedActive:
    def test_crud_never_touches_live_tables(self, base, fabric):
        before = fabric.flowmods_received("sw1")
        call(base, "tok-admin", "POST", "/vlans", {"name": "lab", "vid": 300})
        call(base, "tok-admin", "POST", "/acls",
             {"name": "block-arp",
              "rules": [{"match": {"dl_type": 0x806}, "actions": {"allow": False}}]})
        call(base, "tok-admin", "PUT", "/datapaths/sw1/interfaces/3",
             {"native_vlan": "office", "acls_in": ["block-arp"]})
        status, cfgs = call(base, "tok-admin", "GET", "/config")
        assert cfgs["dirty"]
        assert fabric.flowmods_received("sw1") == before

    def test_apply_pushes_and_promotes(self, base, fabric, service):
        call(base, "tok-admin", "POST", "/acls",
             {"name": "block-arp",
              "rules": [{"match": {"dl_type": 0x806}, "actions": {"allow": False}}]})
        call(base, "tok-admin", "PUT", "/datapaths/sw1/interfaces/3",
             {"native_vlan": "office", "acls_in": ["block-arp"], "name": "AS3",
              "description": "port 4"})
        status, report = call(base, "tok-admin", "POST", "/config/apply")
        assert status == 200
        assert report["per_dp"]["sw1"]["added"] >= 1
        assert report["failed"] == []

        compiled = compile_datapath(service.config_store.active, "sw1")
        assert fabric.read_flow_table("sw1") == compiled.canonical_entries()
        _, cfgs = call(base, "tok-admin", "GET", "/config")
        assert not cfgs["dirty"]

    def test_apply_identity_all_zero(self, base, fabric):
        status, report = call(base, "tok-admin", "POST", "/config/apply")
        assert status == 200
        assert report["per_dp"]["sw1"] == {"added": 0, "removed": 0, "deferred": False}

    def test_yaml_roundtrip(self, base, mirror_cfg):
        status, text = call(base, "tok-admin", "GET", "/config/yaml")
        assert status == 200
        assert parse_config(text) == mirror_cfg

        modified = text.replace("vid: 100", "vid: 150")
        status, body = call(base, "tok-admin", "PUT", "/config/yaml", body=modified,
                            content_type="text/x-yaml")
        assert status == 200
        _, cfgs = call(base, "tok-admin", "GET", "/config")
        assert cfgs["staged"]["vlans"]["office"]["vid"] == 150
        assert cfgs["active"]["vlans"]["office"]["vid"] == 100

    def test_yaml_put_rejects_garbage(self, base):
        status, body = call(base, "tok-admin", "PUT", "/config/yaml",
                            body="vlans: [", content_type="text/x-yaml")
        assert status == 400
        status, body = call(base, "tok-admin", "PUT", "/config/yaml",
                            body="vlans:\n  v:\n    vid: 9999\ndps:\n  s:\n    dp_id: 1\n",
                            content_type="text/x-yaml")
        assert status == 422

    def test_validate_endpoint(self, base):
        status, report = call(base, "tok-admin", "POST", "/config/validate")
        assert status == 200 and report["ok"]


class TestStatusAndStats:
    def test_status_shape(self, base, service):
        status, body = call(base, "tok-admin", "GET", "/status")
        assert status == 200
        assert set(body["endpoints"]) == {"control", "admin", "metrics"}
        assert all(ep["listening"] for ep in body["endpoints"].values())
        assert body["roles"]["controller"] is True
        assert body["roles"]["stats_poller"] is True
        assert body["resident_memory_bytes"] > 0
        assert body["virtual_memory_bytes"] > 0

    def test_stats_flow(self, base, service, fabric):
        from dataclasses import replace as dc_replace
        from sdx.sim import FlowSpec

        fabric.spec = dc_replace(fabric.spec, flows=(
            FlowSpec(src="AS2", dst="AS1", pps=1000, bytes_per_packet=1250,
                     eth_type=0x800, ip_proto=6, stop=120.0),))
        fabric._flow_state = [{"elapsed": 0.0, "emitted": 0}]

        fake_now = [1000.0]
        service.poller.clock = lambda: fake_now[0]
        fabric.advance(15)
        service.poller.poll_cycle()
        fake_now[0] += 15
        fabric.advance(15)
        service.poller.poll_cycle()

        status, body = call(base, "tok-admin", "GET",
                            "/stats/ports?dp=sw1&port=2&window=60")
        assert status == 200
        assert body["rates"]["bits_in_per_sec"] == pytest.approx(1000 * 1250 * 8, rel=0.01)
        assert body["rates"]["pkts_in_per_sec"] == pytest.approx(1000, rel=0.01)
        assert body["samples"]["sdx_port_rx_bytes_total"]

    def test_stats_unknown_port_404(self, base, fabric):
        status, _ = call(base, "tok-admin", "GET", "/stats/ports?dp=sw1&port=9")
        assert status == 404

    def test_stats_no_data_204(self, base, fabric):
        status, _ = call(base, "tok-admin", "GET", "/stats/ports?dp=sw1&port=1")
        assert status == 204

    def test_metrics_endpoint_conformant(self, service, fabric):
        url = f"http://{service.metrics_server.host}:{service.metrics_server.port}/metrics"
        with urllib.request.urlopen(url, timeout=10) as resp:
            assert resp.status == 200
            assert resp.headers["Content-Type"] == "text/plain; version=0.0.4"
            text = resp.read().decode()
        assert check_exposition(text) == []
        assert "process_resident_memory_bytes" in text
