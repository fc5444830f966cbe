import json
from pathlib import Path

import pytest

from sdx import yamlio
from sdx.api import User, UserStore
from sdx.cli import main_sdxctl, main_sdxsim
from sdx.config import parse_acl_rules, parse_config
from sdx.service import SdxService

DATA = Path(__file__).parent / "data"


def parse_acl_fragment(text):
    root = yamlio.load_document(text)
    (key, node), = root.pairs
    return key.raw, parse_acl_rules(key.raw, node)


@pytest.fixture
def fig_file(tmp_path, mirror_yaml):
    path = tmp_path / "sdx.yaml"
    path.write_text(mirror_yaml)
    return str(path)


class TestValidate:
    def test_valid_file_exit_0(self, fig_file, capsys):
        assert main_sdxctl(["validate", fig_file]) == 0
        assert "ok" in capsys.readouterr().out

    def test_syntax_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("vlans: [\n")
        assert main_sdxctl(["validate", str(bad)]) == 2

    def test_violation_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("vlans:\n  v:\n    vid: 9999\ndps:\n  s:\n    dp_id: 1\n")
        assert main_sdxctl(["validate", str(bad)]) == 3
        assert "vid" in capsys.readouterr().out

    def test_json_flag(self, fig_file, capsys):
        assert main_sdxctl(["--json", "validate", fig_file]) == 0
        assert json.loads(capsys.readouterr().out) == {"ok": True, "violations": []}


class TestCompile:
    def test_dump_contains_spec_line(self, fig_file, capsys):
        assert main_sdxctl(["compile", fig_file, "--dp", "sw1"]) == 0
        out = capsys.readouterr().out
        assert "table=0 prio=19999 in_port=2,eth_type=0x0800,ip_proto=1 -> output:4" in out

    def test_byte_identical_twice(self, fig_file, capsys):
        main_sdxctl(["compile", fig_file, "--dp", "sw1"])
        first = capsys.readouterr().out
        main_sdxctl(["compile", fig_file, "--dp", "sw1"])
        assert capsys.readouterr().out == first

    def test_unknown_dp_exit_3(self, fig_file, capsys):
        assert main_sdxctl(["compile", fig_file, "--dp", "sw9"]) == 3


class TestGenAcl:
    def test_mirror_reproduces_reference_block(self, mirror_cfg, capsys):
        assert main_sdxctl(["gen-acl", "mirror", "--to", "4",
                            "--ipv4-icmp", "--ipv6-icmp"]) == 0
        out = capsys.readouterr().out
        name, rules = parse_acl_fragment(out)
        assert name == "mirror"
        assert rules == mirror_cfg.acls["mirror"]

    def test_allow_all(self, mirror_cfg, capsys):
        assert main_sdxctl(["gen-acl", "allow-all", "--name", "allow-all"]) == 0
        name, rules = parse_acl_fragment(capsys.readouterr().out)
        assert rules == mirror_cfg.acls["allow-all"]

    def test_block_with_match(self, capsys):
        assert main_sdxctl(["gen-acl", "block", "--dl-type", "0x800",
                            "--ip-proto", "17"]) == 0
        name, rules = parse_acl_fragment(capsys.readouterr().out)
        assert name == "block"
        assert rules[0].dl_type == 0x800 and rules[0].ip_proto == 17
        assert rules[0].allow is False and rules[0].mirror is None

    def test_redirect_requires_target(self, capsys):
        assert main_sdxctl(["gen-acl", "redirect"]) == 2

    def test_fragment_splices_into_config(self, mirror_yaml, capsys):
        main_sdxctl(["gen-acl", "redirect", "--to", "3", "--name", "tap"])
        fragment = capsys.readouterr().out
        indented = "\n".join("  " + line if line else "" for line in fragment.split("\n"))
        doc = mirror_yaml + indented
        cfg = parse_config(doc)
        assert cfg.acls["tap"][0].redirect == 3


class TestRemote:
    @pytest.fixture
    def service(self, mirror_cfg):
        users = UserStore([User(username="root", role="admin", token="tok")])
        svc = SdxService(mirror_cfg, users, control_port=0, admin_port=0,
                         metrics_port=0, poll_interval=300)
        svc.start()
        yield svc
        svc.stop()

    @pytest.fixture
    def remote_args(self, service):
        return ["--api", f"http://{service.admin_server.host}:{service.admin_server.port}",
                "--token", "tok"]

    def test_status(self, remote_args, capsys):
        assert main_sdxctl(remote_args + ["--json", "status"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["roles"]["controller"] is True

    def test_apply_identity(self, remote_args, fig_file, capsys):
        assert main_sdxctl(remote_args + ["--json", "apply", fig_file]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["failed"] == []
        assert report["per_dp"]["sw1"]["deferred"] is True  # no switch connected

    def test_cli_matches_api_payload(self, remote_args, service, capsys):
        # thin-client check: CLI output is exactly the API's status payload
        assert main_sdxctl(remote_args + ["--json", "status"]) == 0
        cli_payload = json.loads(capsys.readouterr().out)
        assert cli_payload["endpoints"] == service.status().to_dict()["endpoints"]

    def test_stats_no_data(self, remote_args, capsys):
        assert main_sdxctl(remote_args + ["stats", "--dp", "sw1", "--port", "1"]) == 0
        assert "no data" in capsys.readouterr().out

    def test_network_error_exit_4(self, capsys):
        rc = main_sdxctl(["--api", "http://127.0.0.1:9", "--token", "x", "status"])
        assert rc == 4

    def test_auth_error_exit_4(self, remote_args, capsys):
        args = [remote_args[0], remote_args[1], "--token", "wrong", "status"]
        assert main_sdxctl(args) == 4


class TestSdxsim:
    def test_run_embedded(self, tmp_path, mirror_yaml, capsys):
        cfg_file = tmp_path / "sdx.yaml"
        cfg_file.write_text(mirror_yaml)
        topo = tmp_path / "two.yaml"
        topo.write_text((DATA / "two_node.yaml").read_text())
        rc = main_sdxsim(["run", "--topology", str(topo), "--config", str(cfg_file),
                          "--duration", "1", "--json"])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["frames_sent"] == 1000
        assert summary["conservation_ok"] is True

    def test_bad_topology_exit_2(self, tmp_path, capsys):
        topo = tmp_path / "bad.yaml"
        topo.write_text("switches:\n  a: {dp_id: 1, ports: [1]}\n"
                        "hosts:\n  h: {switch: a, port: 9, mac: \"00:00:00:00:00:01\"}\n")
        assert main_sdxsim(["run", "--topology", str(topo), "--controller",
                            "127.0.0.1:6653"]) == 2
