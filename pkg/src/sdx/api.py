"""HTTP administration surface.

CRUD for VLANs, datapaths, interfaces, ACLs, and users; staged-then-apply
configuration; live status; per-port stats. Mutations operate on a staged
config and never touch live flow tables until /config/apply. Authentication
is static bearer tokens mapped to users with admin/moderator/customer roles.
"""

from __future__ import annotations

import json
import logging
import re
import secrets
import threading
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import yamlio
from .config import (AclRuleConfig, ConfigParseError, ConfigValidationError,
                     DatapathConfig, FabricConfig, InterfaceConfig, VlanConfig,
                     config_fingerprint, emit_config, parse_config, validate)
from .controller import ApplyError
from .yamlio import Mapping, Scalar, Sequence, YamlSourceError

log = logging.getLogger(__name__)

ADMIN = "admin"
MODERATOR = "moderator"
CUSTOMER = "customer"
ROLES = (ADMIN, MODERATOR, CUSTOMER)

# Documented role matrix; every (group, verb) pair is total over roles.
# admin: everything. moderator: read config, status, and any port's stats.
# customer: own-port stats (enforced in the handler) and /me only.
PERMISSIONS = {
    ("config_read", "GET"): {ADMIN, MODERATOR},
    ("config_read", "POST"): {ADMIN, MODERATOR},  # /config/validate: read-only check
    ("config_write", "POST"): {ADMIN},
    ("config_write", "PUT"): {ADMIN},
    ("config_write", "DELETE"): {ADMIN},
    ("users", "GET"): {ADMIN},
    ("users", "POST"): {ADMIN},
    ("users", "PUT"): {ADMIN},
    ("users", "DELETE"): {ADMIN},
    ("apply", "POST"): {ADMIN},
    ("status", "GET"): {ADMIN, MODERATOR},
    ("stats", "GET"): {ADMIN, MODERATOR, CUSTOMER},
    ("me", "GET"): {ADMIN, MODERATOR, CUSTOMER},
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, extra: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra or {}


@dataclass(frozen=True)
class User:
    username: str
    role: str
    token: str
    ports: tuple = ()  # (dp, port) pairs a customer owns

    def owns(self, dp: str, port: int) -> bool:
        return (dp, int(port)) in {(d, int(p)) for d, p in self.ports}

    def to_dict(self, with_token: bool = True) -> dict:
        out = {"username": self.username, "role": self.role,
               "ports": [{"dp": d, "port": int(p)} for d, p in self.ports]}
        if with_token:
            out["token"] = self.token
        return out


class UserStore:
    def __init__(self, users=(), path: Path | None = None):
        self._users: dict = {u.username: u for u in users}
        self._path = path
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path) -> "UserStore":
        path = Path(path)
        try:
            root = yamlio.load_document(path.read_text())
        except YamlSourceError as exc:
            raise ApiError(500, "users_file", f"cannot parse users file: {exc}")
        users = []
        if not isinstance(root, Mapping) or root.get("users") is None:
            raise ApiError(500, "users_file", "users file needs a top-level 'users' list")
        for item in root.get("users").items if isinstance(root.get("users"), Sequence) else []:
            m = item
            if not isinstance(m, Mapping):
                raise ApiError(500, "users_file", "each user must be a mapping")
            get = lambda k: m.get(k).raw if isinstance(m.get(k), Scalar) else None
            ports = []
            if isinstance(m.get("ports"), Sequence):
                for p in m.get("ports").items:
                    if isinstance(p, Mapping):
                        ports.append((p.get("dp").raw, int(p.get("port").raw)))
            role = get("role")
            if role not in ROLES:
                raise ApiError(500, "users_file", f"unknown role {role!r}")
            users.append(User(username=get("username"), role=role,
                              token=get("token"), ports=tuple(ports)))
        return cls(users, path=path)

    def save(self) -> None:
        if self._path is None:
            return
        lines = ["users:"]
        for user in sorted(self._users.values(), key=lambda u: u.username):
            lines.append(f"  - username: {user.username}")
            lines.append(f"    role: {user.role}")
            lines.append(f"    token: {user.token}")
            if user.ports:
                lines.append("    ports:")
                for dp, port in user.ports:
                    lines.append(f"      - {{dp: {dp}, port: {port}}}")
        self._path.write_text("\n".join(lines) + "\n")

    def by_token(self, token: str) -> User | None:
        with self._lock:
            for user in self._users.values():
                if user.token == token:
                    return user
        return None

    def get(self, username: str) -> User | None:
        with self._lock:
            return self._users.get(username)

    def list(self) -> list:
        with self._lock:
            return sorted(self._users.values(), key=lambda u: u.username)

    def upsert(self, user: User, create_only: bool = False) -> bool:
        with self._lock:
            existed = user.username in self._users
            if existed and create_only:
                raise ApiError(409, "exists", f"user {user.username} already exists")
            self._users[user.username] = user
            self.save()
            return not existed

    def delete(self, username: str) -> None:
        with self._lock:
            if username not in self._users:
                raise ApiError(404, "not_found", f"unknown user {username}")
            del self._users[username]
            self.save()


# ---------------------------------------------------------------------------
# JSON codecs mirroring the config model 1:1

def vlan_to_json(v: VlanConfig) -> dict:
    return {"name": v.name, "vid": v.vid, "description": v.description}


def rule_to_json(r: AclRuleConfig) -> dict:
    match = {}
    if r.dl_type is not None:
        match["dl_type"] = r.dl_type
    if r.ip_proto is not None:
        match["ip_proto"] = r.ip_proto
    actions: dict = {"allow": r.allow}
    if r.mirror is not None:
        actions["mirror"] = r.mirror
    if r.redirect is not None:
        actions["redirect"] = r.redirect
    return {"match": match, "actions": actions}


def iface_to_json(port: int, i: InterfaceConfig) -> dict:
    return {"port": port, "name": i.name, "description": i.description,
            "native_vlan": i.native_vlan, "acls_in": list(i.acls_in)}


def dp_to_json(d: DatapathConfig) -> dict:
    return {"name": d.name, "dp_id": d.dp_id, "hardware": d.hardware,
            "interfaces": {str(p): iface_to_json(p, i)
                           for p, i in sorted(d.interfaces.items())}}


def acl_to_json(name: str, rules) -> dict:
    return {"name": name, "rules": [rule_to_json(r) for r in rules]}


def cfg_to_json(cfg: FabricConfig) -> dict:
    return {"vlans": {n: vlan_to_json(v) for n, v in sorted(cfg.vlans.items())},
            "dps": {n: dp_to_json(d) for n, d in sorted(cfg.dps.items())},
            "acls": {n: acl_to_json(n, r) for n, r in sorted(cfg.acls.items())}}


def _need(body: dict, key: str):
    if key not in body:
        raise ApiError(422, "missing_field", f"missing field: {key}")
    return body[key]


def _as_int(value, what: str) -> int:
    if isinstance(value, bool):
        raise ApiError(422, "bad_field", f"{what} must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        raw = value.strip()
        try:
            return int(raw, 16) if raw.lower().startswith("0x") else int(raw)
        except ValueError:
            pass
    raise ApiError(422, "bad_field", f"{what} must be an integer")


def vlan_from_json(body: dict, name: str | None = None) -> VlanConfig:
    vname = name or _need(body, "name")
    return VlanConfig(name=vname, vid=_as_int(_need(body, "vid"), "vid"),
                      description=str(body.get("description", "")))


def rule_from_json(body: dict) -> AclRuleConfig:
    match = body.get("match", {}) or {}
    actions = _need(body, "actions")
    if "allow" not in actions or not isinstance(actions["allow"], bool):
        raise ApiError(422, "bad_field", "actions.allow must be a boolean")
    return AclRuleConfig(
        dl_type=_as_int(match["dl_type"], "dl_type") if "dl_type" in match else None,
        ip_proto=_as_int(match["ip_proto"], "ip_proto") if "ip_proto" in match else None,
        allow=actions["allow"],
        mirror=_as_int(actions["mirror"], "mirror") if "mirror" in actions else None,
        redirect=_as_int(actions["redirect"], "redirect") if "redirect" in actions else None)


def iface_from_json(body: dict) -> InterfaceConfig:
    return InterfaceConfig(native_vlan=str(_need(body, "native_vlan")),
                           name=str(body.get("name", "")),
                           description=str(body.get("description", "")),
                           acls_in=tuple(str(a) for a in body.get("acls_in", [])))


def dp_from_json(body: dict, name: str | None = None) -> DatapathConfig:
    dname = name or _need(body, "name")
    interfaces = {}
    for key, iface in (body.get("interfaces") or {}).items():
        interfaces[_as_int(key, "port")] = iface_from_json(iface)
    return DatapathConfig(name=dname, dp_id=_as_int(_need(body, "dp_id"), "dp_id"),
                          hardware=str(body.get("hardware", "")), interfaces=interfaces)


# ---------------------------------------------------------------------------
# Staged configuration

class StagedConfigStore:
    """Single-writer staged config beside the controller's active one."""

    def __init__(self, active: FabricConfig):
        self.active = active
        self.staged = active
        self._lock = threading.Lock()

    @property
    def dirty(self) -> bool:
        return self.staged != self.active

    def replace_staged(self, cfg: FabricConfig) -> None:
        report = validate(cfg)
        if not report.ok:
            raise ApiError(422, "invalid_config", "staged config rejected",
                           {"violations": [v.to_dict() for v in report.violations]})
        with self._lock:
            self.staged = cfg

    def mutate(self, build, deleting: bool = False) -> FabricConfig:
        """Apply build(staged) -> candidate; reject on validation failure.

        Violations on a delete are referential-integrity breaks (409);
        violations on create/update are invariant violations (422).
        """
        with self._lock:
            candidate = build(self.staged)
            report = validate(candidate)
            if not report.ok:
                status = 409 if deleting else 422
                code = "integrity_violation" if deleting else "invariant_violation"
                raise ApiError(status, code, report.violations[0].message,
                               {"violations": [v.to_dict() for v in report.violations]})
            self.staged = candidate
            return candidate

    def promote(self, cfg: FabricConfig) -> None:
        with self._lock:
            self.active = cfg
            self.staged = cfg


# ---------------------------------------------------------------------------
# HTTP plumbing

@dataclass
class Request:
    method: str
    path: str
    query: dict
    body: dict | None
    raw_body: bytes
    user: User | None


_ROUTES: list = []


def route(method: str, pattern: str, group: str):
    compiled = re.compile("^" + pattern + "$")

    def wrap(fn):
        _ROUTES.append((method, compiled, group, fn))
        return fn
    return wrap


class AdminApi:
    """Route handlers bound to the running service."""

    def __init__(self, service):
        self.service = service

    # -- config object CRUD --------------------------------------------------
    @route("GET", r"/vlans", "config_read")
    def list_vlans(self, req, m):
        store = self.service.config_store
        return 200, {"staged": [vlan_to_json(v) for _, v in sorted(store.staged.vlans.items())],
                     "active": [vlan_to_json(v) for _, v in sorted(store.active.vlans.items())]}

    @route("POST", r"/vlans", "config_write")
    def create_vlan(self, req, m):
        vlan = vlan_from_json(req.body or {})
        store = self.service.config_store
        if vlan.name in store.staged.vlans:
            raise ApiError(409, "exists", f"VLAN {vlan.name} already exists")
        store.mutate(lambda c: FabricConfig(vlans={**c.vlans, vlan.name: vlan},
                                            dps=c.dps, acls=c.acls))
        return 201, vlan_to_json(vlan)

    @route("GET", r"/vlans/([A-Za-z0-9_-]+)", "config_read")
    def get_vlan(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        staged = store.staged.vlans.get(name)
        active = store.active.vlans.get(name)
        if staged is None and active is None:
            raise ApiError(404, "not_found", f"unknown VLAN {name}")
        return 200, {"staged": vlan_to_json(staged) if staged else None,
                     "active": vlan_to_json(active) if active else None}

    @route("PUT", r"/vlans/([A-Za-z0-9_-]+)", "config_write")
    def put_vlan(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.vlans:
            raise ApiError(404, "not_found", f"unknown VLAN {name}")
        vlan = vlan_from_json(req.body or {}, name=name)
        store.mutate(lambda c: FabricConfig(vlans={**c.vlans, name: vlan},
                                            dps=c.dps, acls=c.acls))
        return 200, vlan_to_json(vlan)

    @route("DELETE", r"/vlans/([A-Za-z0-9_-]+)", "config_write")
    def delete_vlan(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.vlans:
            raise ApiError(404, "not_found", f"unknown VLAN {name}")

        def build(c):
            vlans = dict(c.vlans)
            del vlans[name]
            return FabricConfig(vlans=vlans, dps=c.dps, acls=c.acls)
        store.mutate(build, deleting=True)
        return 200, {"deleted": name}

    @route("GET", r"/datapaths", "config_read")
    def list_dps(self, req, m):
        store = self.service.config_store
        return 200, {"staged": [dp_to_json(d) for _, d in sorted(store.staged.dps.items())],
                     "active": [dp_to_json(d) for _, d in sorted(store.active.dps.items())]}

    @route("POST", r"/datapaths", "config_write")
    def create_dp(self, req, m):
        dp = dp_from_json(req.body or {})
        store = self.service.config_store
        if dp.name in store.staged.dps:
            raise ApiError(409, "exists", f"datapath {dp.name} already exists")
        store.mutate(lambda c: FabricConfig(vlans=c.vlans, dps={**c.dps, dp.name: dp},
                                            acls=c.acls))
        return 201, dp_to_json(dp)

    @route("GET", r"/datapaths/([A-Za-z0-9_-]+)", "config_read")
    def get_dp(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        staged = store.staged.dps.get(name)
        active = store.active.dps.get(name)
        if staged is None and active is None:
            raise ApiError(404, "not_found", f"unknown datapath {name}")
        return 200, {"staged": dp_to_json(staged) if staged else None,
                     "active": dp_to_json(active) if active else None}

    @route("PUT", r"/datapaths/([A-Za-z0-9_-]+)", "config_write")
    def put_dp(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.dps:
            raise ApiError(404, "not_found", f"unknown datapath {name}")
        dp = dp_from_json(req.body or {}, name=name)
        store.mutate(lambda c: FabricConfig(vlans=c.vlans, dps={**c.dps, name: dp},
                                            acls=c.acls))
        return 200, dp_to_json(dp)

    @route("DELETE", r"/datapaths/([A-Za-z0-9_-]+)", "config_write")
    def delete_dp(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.dps:
            raise ApiError(404, "not_found", f"unknown datapath {name}")

        def build(c):
            dps = dict(c.dps)
            del dps[name]
            return FabricConfig(vlans=c.vlans, dps=dps, acls=c.acls)
        store.mutate(build, deleting=True)
        return 200, {"deleted": name}

    @route("GET", r"/interfaces", "config_read")
    def list_interfaces(self, req, m):
        def flat(cfg):
            return [dict(iface_to_json(p, i), dp=dname)
                    for dname, d in sorted(cfg.dps.items())
                    for p, i in sorted(d.interfaces.items())]
        store = self.service.config_store
        return 200, {"staged": flat(store.staged), "active": flat(store.active)}

    @route("POST", r"/datapaths/([A-Za-z0-9_-]+)/interfaces", "config_write")
    def create_interface(self, req, m):
        dp_name = m.group(1)
        body = req.body or {}
        port = _as_int(_need(body, "port"), "port")
        return self._upsert_interface(dp_name, port, body, create_only=True)

    @route("GET", r"/datapaths/([A-Za-z0-9_-]+)/interfaces/([0-9]+)", "config_read")
    def get_interface(self, req, m):
        dp_name, port = m.group(1), int(m.group(2))
        store = self.service.config_store
        dp = store.staged.dps.get(dp_name)
        if dp is None or port not in dp.interfaces:
            raise ApiError(404, "not_found", f"unknown interface {dp_name}/{port}")
        return 200, dict(iface_to_json(port, dp.interfaces[port]), dp=dp_name)

    @route("PUT", r"/datapaths/([A-Za-z0-9_-]+)/interfaces/([0-9]+)", "config_write")
    def put_interface(self, req, m):
        return self._upsert_interface(m.group(1), int(m.group(2)), req.body or {},
                                      create_only=False)

    def _upsert_interface(self, dp_name: str, port: int, body: dict, create_only: bool):
        store = self.service.config_store
        dp = store.staged.dps.get(dp_name)
        if dp is None:
            raise ApiError(404, "not_found", f"unknown datapath {dp_name}")
        if create_only and port in dp.interfaces:
            raise ApiError(409, "exists", f"interface {dp_name}/{port} already exists")
        iface = iface_from_json(body)

        def build(c):
            d = c.dps[dp_name]
            return FabricConfig(vlans=c.vlans, acls=c.acls,
                                dps={**c.dps, dp_name: replace(
                                    d, interfaces={**d.interfaces, port: iface})})
        store.mutate(build)
        return (201 if create_only else 200), dict(iface_to_json(port, iface), dp=dp_name)

    @route("DELETE", r"/datapaths/([A-Za-z0-9_-]+)/interfaces/([0-9]+)", "config_write")
    def delete_interface(self, req, m):
        dp_name, port = m.group(1), int(m.group(2))
        store = self.service.config_store
        dp = store.staged.dps.get(dp_name)
        if dp is None or port not in dp.interfaces:
            raise ApiError(404, "not_found", f"unknown interface {dp_name}/{port}")

        def build(c):
            d = c.dps[dp_name]
            interfaces = dict(d.interfaces)
            del interfaces[port]
            return FabricConfig(vlans=c.vlans, acls=c.acls,
                                dps={**c.dps, dp_name: replace(d, interfaces=interfaces)})
        store.mutate(build, deleting=True)
        return 200, {"deleted": f"{dp_name}/{port}"}

    @route("GET", r"/acls", "config_read")
    def list_acls(self, req, m):
        store = self.service.config_store
        return 200, {"staged": [acl_to_json(n, r) for n, r in sorted(store.staged.acls.items())],
                     "active": [acl_to_json(n, r) for n, r in sorted(store.active.acls.items())]}

    @route("POST", r"/acls", "config_write")
    def create_acl(self, req, m):
        body = req.body or {}
        name = str(_need(body, "name"))
        rules = tuple(rule_from_json(r) for r in _need(body, "rules"))
        store = self.service.config_store
        if name in store.staged.acls:
            raise ApiError(409, "exists", f"ACL {name} already exists")
        store.mutate(lambda c: FabricConfig(vlans=c.vlans, dps=c.dps,
                                            acls={**c.acls, name: rules}))
        return 201, acl_to_json(name, rules)

    @route("GET", r"/acls/([A-Za-z0-9_-]+)", "config_read")
    def get_acl(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.acls and name not in store.active.acls:
            raise ApiError(404, "not_found", f"unknown ACL {name}")
        return 200, {
            "staged": acl_to_json(name, store.staged.acls[name])
            if name in store.staged.acls else None,
            "active": acl_to_json(name, store.active.acls[name])
            if name in store.active.acls else None}

    @route("PUT", r"/acls/([A-Za-z0-9_-]+)", "config_write")
    def put_acl(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.acls:
            raise ApiError(404, "not_found", f"unknown ACL {name}")
        rules = tuple(rule_from_json(r) for r in _need(req.body or {}, "rules"))
        store.mutate(lambda c: FabricConfig(vlans=c.vlans, dps=c.dps,
                                            acls={**c.acls, name: rules}))
        return 200, acl_to_json(name, rules)

    @route("DELETE", r"/acls/([A-Za-z0-9_-]+)", "config_write")
    def delete_acl(self, req, m):
        name = m.group(1)
        store = self.service.config_store
        if name not in store.staged.acls:
            raise ApiError(404, "not_found", f"unknown ACL {name}")

        def build(c):
            acls = dict(c.acls)
            del acls[name]
            return FabricConfig(vlans=c.vlans, dps=c.dps, acls=acls)
        store.mutate(build, deleting=True)
        return 200, {"deleted": name}

    # -- users -----------------------------------------------------------------
    @route("GET", r"/users", "users")
    def list_users(self, req, m):
        return 200, {"users": [u.to_dict() for u in self.service.users.list()]}

    @route("POST", r"/users", "users")
    def create_user(self, req, m):
        user = self._user_from_json(req.body or {})
        self.service.users.upsert(user, create_only=True)
        return 201, user.to_dict()

    @route("GET", r"/users/([A-Za-z0-9_.-]+)", "users")
    def get_user(self, req, m):
        user = self.service.users.get(m.group(1))
        if user is None:
            raise ApiError(404, "not_found", f"unknown user {m.group(1)}")
        return 200, user.to_dict()

    @route("PUT", r"/users/([A-Za-z0-9_.-]+)", "users")
    def put_user(self, req, m):
        body = dict(req.body or {})
        body["username"] = m.group(1)
        user = self._user_from_json(body)
        self.service.users.upsert(user)
        return 200, user.to_dict()

    @route("DELETE", r"/users/([A-Za-z0-9_.-]+)", "users")
    def delete_user(self, req, m):
        self.service.users.delete(m.group(1))
        return 200, {"deleted": m.group(1)}

    def _user_from_json(self, body: dict) -> User:
        username = str(_need(body, "username"))
        role = str(_need(body, "role"))
        if role not in ROLES:
            raise ApiError(422, "bad_field", f"unknown role {role!r}")
        ports = tuple((str(p["dp"]), _as_int(p["port"], "port"))
                      for p in body.get("ports", []))
        token = str(body.get("token") or secrets.token_hex(16))
        return User(username=username, role=role, token=token, ports=ports)

    # -- config document operations ----------------------------------------------
    @route("GET", r"/config", "config_read")
    def get_config(self, req, m):
        store = self.service.config_store
        return 200, {"staged": cfg_to_json(store.staged),
                     "active": cfg_to_json(store.active),
                     "dirty": store.dirty,
                     "staged_fingerprint": config_fingerprint(store.staged),
                     "active_fingerprint": config_fingerprint(store.active)}

    @route("GET", r"/config/yaml", "config_read")
    def get_config_yaml(self, req, m):
        store = self.service.config_store
        which = (req.query.get("version") or ["staged"])[0]
        if which not in ("staged", "active"):
            raise ApiError(422, "bad_field", "version must be staged or active")
        cfg = store.staged if which == "staged" else store.active
        return 200, emit_config(cfg)

    @route("PUT", r"/config/yaml", "config_write")
    def put_config_yaml(self, req, m):
        try:
            cfg = parse_config(req.raw_body.decode("utf-8", "replace"))
        except ConfigValidationError as exc:
            raise ApiError(422, "invalid_config", str(exc),
                           {"violations": [v.to_dict() for v in exc.report.violations]})
        except ConfigParseError as exc:
            raise ApiError(400, exc.code, exc.message)
        self.service.config_store.replace_staged(cfg)
        return 200, {"ok": True, "staged_fingerprint": config_fingerprint(cfg)}

    @route("POST", r"/config/validate", "config_read")
    def validate_config(self, req, m):
        return 200, validate(self.service.config_store.staged).to_dict()

    @route("POST", r"/config/apply", "apply")
    def apply_config(self, req, m):
        store = self.service.config_store
        staged = store.staged
        try:
            report = self.service.controller.apply_config(staged)
        except ConfigValidationError as exc:
            raise ApiError(422, "invalid_config", str(exc),
                           {"violations": [v.to_dict() for v in exc.report.violations]})
        except ApplyError as exc:
            raise ApiError(502, "push_failed", str(exc), {"report": exc.report.to_dict()})
        store.promote(staged)
        return 200, report.to_dict()

    # -- status and stats ------------------------------------------------------------
    @route("GET", r"/status", "status")
    def get_status(self, req, m):
        return 200, self.service.status().to_dict()

    @route("GET", r"/me", "me")
    def get_me(self, req, m):
        return 200, req.user.to_dict(with_token=False)

    @route("GET", r"/stats/ports", "stats")
    def get_port_stats(self, req, m):
        dp = (req.query.get("dp") or [None])[0]
        port_raw = (req.query.get("port") or [None])[0]
        if not dp or not port_raw:
            raise ApiError(422, "missing_field", "dp and port query parameters required")
        port = _as_int(port_raw, "port")
        window = float((req.query.get("window") or ["60"])[0])

        active = self.service.config_store.active
        if dp not in active.dps or port not in active.dps[dp].interfaces:
            raise ApiError(404, "not_found", f"unknown port {dp}/{port}")
        if req.user.role == CUSTOMER and not req.user.owns(dp, port):
            raise ApiError(403, "forbidden", "customers may only read their own ports")

        from .stats import COUNTER_METRICS, compute_rates, series_key
        rates = compute_rates(self.service.series_store, dp, port, window_seconds=window)
        if rates is None:
            return 204, None
        samples = {}
        newest = 0
        for _, metric in COUNTER_METRICS:
            s = self.service.series_store.samples(series_key(metric, dp=dp, port=port))
            if s:
                newest = max(newest, s[-1][0])
            samples[metric] = s
        lo = newest - int(window * 1000)
        samples = {metric: [[ts, v] for ts, v in s if ts >= lo]
                   for metric, s in samples.items()}
        return 200, {"dp": dp, "port": port, "window": window,
                     "rates": rates.to_dict(), "samples": samples}


# ---------------------------------------------------------------------------
# Server

def _make_handler(api: AdminApi, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "sdx-admin/0.1"

        def log_message(self, fmt, *args):
            log.debug("admin: " + fmt, *args)

        def _respond(self, status: int, payload, content_type="application/json"):
            if status == 204 or payload is None:
                self.send_response(status)
                self.send_header("Content-Length", "0")
                self.end_headers()
                return
            if isinstance(payload, (dict, list)):
                data = (json.dumps(payload, indent=2) + "\n").encode("utf-8")
            elif isinstance(payload, str):
                data = payload.encode("utf-8")
                if content_type == "application/json":
                    content_type = "text/plain; charset=utf-8"
            else:
                data = payload
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _error(self, status: int, code: str, message: str, extra=None):
            body = {"error": {"code": code, "message": message}}
            if extra:
                body["error"].update(extra)
            self._respond(status, body)

        def _serve_ui(self, path: str):
            if ui_dir is None:
                self._error(404, "not_found", "dashboard assets not installed")
                return
            rel = path[len("/ui"):].lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._error(404, "not_found", f"no such asset: {rel}")
                return
            types = {".html": "text/html; charset=utf-8", ".js": "text/javascript",
                     ".css": "text/css", ".svg": "image/svg+xml", ".map": "application/json"}
            self._respond(200, target.read_bytes(),
                          content_type=types.get(target.suffix, "application/octet-stream"))

        def _route(self, method: str):
            parsed = urlparse(self.path)
            path = parsed.path.rstrip("/") or "/"
            if path == "/ui" or path.startswith("/ui/"):
                self._serve_ui(path)
                return

            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""

            auth = self.headers.get("Authorization") or ""
            token = auth[7:].strip() if auth.startswith("Bearer ") else None
            user = api.service.users.by_token(token) if token else None

            for route_method, pattern, group, fn in _ROUTES:
                if route_method != method:
                    continue
                m = pattern.match(path)
                if not m:
                    continue
                if user is None:
                    self._error(401, "unauthenticated", "missing or unknown bearer token")
                    return
                allowed = PERMISSIONS.get((group, method), set())
                if user.role not in allowed:
                    self._error(403, "forbidden",
                                f"role {user.role} may not {method} {path}")
                    return
                body = None
                if raw and self.headers.get("Content-Type", "").startswith("application/json"):
                    try:
                        body = json.loads(raw.decode("utf-8"))
                    except (UnicodeDecodeError, json.JSONDecodeError):
                        self._error(400, "bad_json", "request body is not valid JSON")
                        return
                req = Request(method=method, path=path, query=parse_qs(parsed.query),
                              body=body, raw_body=raw, user=user)
                try:
                    status, payload = fn(api, req, m)
                except ApiError as exc:
                    self._error(exc.status, exc.code, exc.message, exc.extra)
                    return
                except Exception as exc:  # pragma: no cover - last-resort guard
                    log.exception("handler error")
                    self._error(500, "internal", str(exc))
                    return
                content_type = "text/x-yaml" if path == "/config/yaml" and method == "GET" \
                    else "application/json"
                self._respond(status, payload, content_type=content_type)
                return
            self._error(404, "not_found", f"no route for {method} {path}")

        def do_GET(self):
            self._route("GET")

        def do_POST(self):
            self._route("POST")

        def do_PUT(self):
            self._route("PUT")

        def do_DELETE(self):
            self._route("DELETE")

    return Handler


class AdminServer:
    def __init__(self, api: AdminApi, host: str = "127.0.0.1", port: int = 8080,
                 ui_dir=None):
        self._httpd = ThreadingHTTPServer(
            (host, port), _make_handler(api, Path(ui_dir) if ui_dir else None))
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name="admin-http", daemon=True)
        self._thread.start()

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
