"""Command-line tools.

sdxctl — operator client: validate, compile preview, apply, status, stats,
          ACL snippet generation. Exit codes: 0 ok, 2 parse error,
          3 validation violations, 4 remote/API error.
sdxd    — the service daemon (controller + stats + admin + metrics).
sdxsim  — the fabric simulator, optionally with an embedded service.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import time
import urllib.error
import urllib.request

from .compiler import compile_datapath, format_table, CompileError
from .config import (AclRuleConfig, ConfigParseError, ConfigValidationError,
                     emit_acl_rules, parse_config)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_REMOTE = 4

DEFAULT_API = "http://127.0.0.1:8080"


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def _load_config(path: str):
    text = _read_file(path)
    try:
        return parse_config(text)
    except ConfigValidationError as exc:
        for v in exc.report.violations:
            print(f"violation [{v.code}] {v.message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


# ---------------------------------------------------------------------------
# API client

def _api_call(args, method: str, path: str, body=None, content_type="application/json"):
    base = (args.api or os.environ.get("SDX_API") or DEFAULT_API).rstrip("/")
    token = args.token or os.environ.get("SDX_TOKEN") or ""
    data = None
    if body is not None:
        data = body.encode("utf-8") if isinstance(body, str) else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method)
    req.add_header("Authorization", f"Bearer {token}")
    if data is not None:
        req.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            raw = resp.read().decode("utf-8")
            ctype = resp.headers.get("Content-Type", "")
            return resp.status, json.loads(raw) if "json" in ctype and raw else raw
    except urllib.error.HTTPError as exc:
        raw = exc.read().decode("utf-8", "replace")
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError:
            payload = {"error": {"code": "http", "message": raw.strip()}}
        err = payload.get("error", {})
        print(f"api error {exc.code}: [{err.get('code')}] {err.get('message')}",
              file=sys.stderr)
        raise SystemExit(EXIT_REMOTE)
    except (urllib.error.URLError, OSError) as exc:
        print(f"network error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_REMOTE)


# ---------------------------------------------------------------------------
# sdxctl subcommands

def cmd_validate(args) -> int:
    text = _read_file(args.file)
    try:
        parse_config(text)
    except ConfigValidationError as exc:
        if args.json:
            print(json.dumps(exc.report.to_dict(), indent=2))
        else:
            for v in exc.report.violations:
                print(f"violation [{v.code}] {v.message}")
        return EXIT_VALIDATION
    except ConfigParseError as exc:
        if args.json:
            print(json.dumps({"ok": False, "error": {"code": exc.code,
                                                     "message": exc.message,
                                                     "line": exc.line, "col": exc.col}}))
        else:
            print(f"parse error: {exc}")
        return EXIT_PARSE
    print(json.dumps({"ok": True, "violations": []}) if args.json else "ok")
    return EXIT_OK


def cmd_compile(args) -> int:
    cfg = _load_config(args.file)
    try:
        table = compile_datapath(cfg, args.dp)
    except CompileError as exc:
        print(f"compile error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(format_table(table))
    return EXIT_OK


def cmd_apply(args) -> int:
    _load_config(args.file)  # local gate first: exit 2/3 before any push
    _api_call(args, "PUT", "/config/yaml", body=_read_file(args.file),
              content_type="text/x-yaml")
    status, report = _api_call(args, "POST", "/config/apply")
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for dp, row in sorted(report.get("per_dp", {}).items()):
            state = "deferred" if row.get("deferred") else \
                f"+{row.get('added', 0)}/-{row.get('removed', 0)}"
            print(f"{dp}: {state}")
        print(f"fingerprint: {report.get('fingerprint')}  "
              f"duration: {report.get('duration', 0):.3f}s")
    return EXIT_OK


def cmd_status(args) -> int:
    status, payload = _api_call(args, "GET", "/status")
    if args.json:
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    for name, ep in sorted(payload["endpoints"].items()):
        flag = "up" if ep["listening"] else "down"
        print(f"{name:8s} {ep['host']}:{ep['port']} [{flag}]")
    for role, live in sorted(payload["roles"].items()):
        print(f"{role:14s} {'live' if live else 'down'}")
    print(f"cpu: {payload['cpu_percent']:.2f}%  "
          f"rss: {payload['resident_memory_bytes']}  "
          f"vms: {payload['virtual_memory_bytes']}")
    for dp, sess in sorted(payload["sessions"].items()):
        print(f"dp {dp}: {sess['state']} fingerprint={sess['fingerprint'] or '-'}")
    return EXIT_OK


def cmd_stats(args) -> int:
    path = f"/stats/ports?dp={args.dp}&port={args.port}&window={args.window}"
    status, payload = _api_call(args, "GET", path)
    if status == 204 or payload in ("", None):
        print("no data")
        return EXIT_OK
    if args.json:
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    rates = payload["rates"]
    print(f"{args.dp} port {args.port} (window {payload['window']}s)")
    print(f"  bits_in/s:  {rates['bits_in_per_sec']:.1f}")
    print(f"  bits_out/s: {rates['bits_out_per_sec']:.1f}")
    print(f"  pkts_in/s:  {rates['pkts_in_per_sec']:.1f}")
    print(f"  pkts_out/s: {rates['pkts_out_per_sec']:.1f}")
    return EXIT_OK


def gen_acl_rules(args) -> tuple:
    """Build the ACL block for gen-acl; returns (name, rules)."""
    matches = []
    if getattr(args, "ipv4_icmp", False):
        matches.append((0x800, 1))
    if getattr(args, "ipv6_icmp", False):
        matches.append((0x86DD, 58))
    if getattr(args, "dl_type", None) is not None:
        matches.append((args.dl_type, getattr(args, "ip_proto", None)))
    if not matches:
        matches.append((None, None))

    kind = args.kind
    rules = []
    for dl_type, ip_proto in matches:
        if kind == "mirror":
            rules.append(AclRuleConfig(dl_type=dl_type, ip_proto=ip_proto,
                                       allow=False, mirror=args.to))
        elif kind == "block":
            rules.append(AclRuleConfig(dl_type=dl_type, ip_proto=ip_proto, allow=False))
        elif kind == "redirect":
            rules.append(AclRuleConfig(dl_type=dl_type, ip_proto=ip_proto,
                                       allow=False, redirect=args.to))
        else:  # allow-all
            rules.append(AclRuleConfig(allow=True))
    name = args.name or kind
    return name, tuple(rules)


def cmd_gen_acl(args) -> int:
    if args.kind in ("mirror", "redirect") and args.to is None:
        print("error: --to PORT is required", file=sys.stderr)
        return EXIT_PARSE
    name, rules = gen_acl_rules(args)
    sys.stdout.write(emit_acl_rules(name, rules))
    return EXIT_OK


def _hexint(value: str) -> int:
    return int(value, 16) if value.lower().startswith("0x") else int(value)


def build_sdxctl_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdxctl", description="IXP fabric operator client")
    ap.add_argument("--api", help="admin API base URL (env SDX_API)")
    ap.add_argument("--token", help="bearer token (env SDX_TOKEN)")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="validate a fabric YAML file")
    p.add_argument("file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("compile", help="print the compiled flow table for one datapath")
    p.add_argument("file")
    p.add_argument("--dp", required=True)
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("apply", help="stage a YAML file remotely and apply it")
    p.add_argument("file")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("status", help="show controller live status")
    p.set_defaults(fn=cmd_status)

    p = sub.add_parser("stats", help="show port rates")
    p.add_argument("--dp", required=True)
    p.add_argument("--port", required=True, type=int)
    p.add_argument("--window", type=float, default=60.0)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("gen-acl", help="emit a YAML ACL block")
    p.add_argument("kind", choices=["mirror", "block", "redirect", "allow-all"])
    p.add_argument("--to", type=int, help="mirror/redirect target port")
    p.add_argument("--name", help="ACL name (defaults to the kind)")
    p.add_argument("--ipv4-icmp", action="store_true", help="match IPv4 ICMP")
    p.add_argument("--ipv6-icmp", action="store_true", help="match IPv6 ICMPv6")
    p.add_argument("--dl-type", type=_hexint, help="match EtherType (hex or decimal)")
    p.add_argument("--ip-proto", type=int, help="match IP protocol number")
    p.set_defaults(fn=cmd_gen_acl)
    return ap


def main_sdxctl(argv=None) -> int:
    args = build_sdxctl_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_PARSE


# ---------------------------------------------------------------------------
# sdxd

def main_sdxd(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sdxd", description="IXP fabric service daemon")
    ap.add_argument("--config", default="sdx.yaml")
    ap.add_argument("--users", help="users YAML file (default: single admin/admin-token)")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--control-port", type=int, default=None)
    ap.add_argument("--admin-port", type=int, default=None)
    ap.add_argument("--metrics-port", type=int, default=None)
    ap.add_argument("--interval", type=float, default=15.0, help="stats poll interval")
    ap.add_argument("--ui", help="directory of dashboard assets served under /ui")
    args = ap.parse_args(argv)

    from .api import UserStore
    from .service import SdxService

    text = _read_file(args.config)
    try:
        cfg = parse_config(text)
    except ConfigValidationError as exc:
        for v in exc.report.violations:
            print(f"violation [{v.code}] {v.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    users = UserStore.load(args.users) if args.users else None
    service = SdxService(cfg, users, host=args.host, control_port=args.control_port,
                         admin_port=args.admin_port, metrics_port=args.metrics_port,
                         poll_interval=args.interval, ui_dir=args.ui)
    service.start()
    # flushed so wrappers reading a pipe see the chosen ports immediately
    print(f"control  {service.controller.host}:{service.controller.port}", flush=True)
    print(f"admin    {service.admin_server.host}:{service.admin_server.port}", flush=True)
    print(f"metrics  {service.metrics_server.host}:{service.metrics_server.port}", flush=True)

    stop = {"flag": False}

    def on_signal(_sig, _frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    try:
        while not stop["flag"]:
            signal.pause()
    except (KeyboardInterrupt, AttributeError):
        pass
    finally:
        service.stop()
    return EXIT_OK


# ---------------------------------------------------------------------------
# sdxsim

def main_sdxsim(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sdxsim", description="simulated OpenFlow fabric")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run a topology against a controller")
    p.add_argument("--topology", required=True)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--tick", type=float, default=0.1)
    p.add_argument("--controller", help="host:port of a running controller")
    p.add_argument("--config", help="fabric YAML: run an embedded service instead")
    p.add_argument("--linger", type=float, default=0.0,
                   help="keep sessions up N wall seconds after the run so "
                        "collectors can scrape the final counters")
    p.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    from .sim import SimFabric, TopologyError, parse_topology

    try:
        spec = parse_topology(_read_file(args.topology))
    except TopologyError as exc:
        print(f"topology error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    service = None
    if args.config:
        from .service import SdxService
        cfg = parse_config(_read_file(args.config))
        service = SdxService(cfg, control_port=0, admin_port=0, metrics_port=0)
        service.start()
        host, port = service.controller.host, service.controller.port
    elif args.controller:
        host, _, port_s = args.controller.partition(":")
        port = int(port_s or 6653)
    else:
        print("error: pass --controller HOST:PORT or --config FILE", file=sys.stderr)
        return EXIT_PARSE

    fabric = SimFabric(spec, host, port, tick=args.tick)
    try:
        fabric.start(timeout=10)
        summary = fabric.advance(args.duration)
        if args.linger > 0:
            time.sleep(args.linger)
    finally:
        fabric.stop()
        if service:
            service.stop()

    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"simulated {summary['duration']}s: sent={summary['frames_sent']} "
              f"delivered={summary['delivered']} diverted={summary['diverted']} "
              f"dropped={summary['dropped']}")
        for host_name, n in sorted(summary["ledger"]["received"].items()):
            print(f"  {host_name}: received={n} "
                  f"seen={summary['ledger']['seen'][host_name]}")
        print(f"conservation: {'ok' if summary['conservation_ok'] else 'VIOLATED'}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main_sdxctl())
