"""Sessions and project/team-scoped role-based authorization.

Default deny everywhere. Policies attach a role to a principal on a
resource or a wildcard; a check walks the resource's enclosing scopes
(dataset -> project -> platform) and the principal's teams, with any
matching deny overriding every allow.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .coretypes import new_id, utcnow
from .errors import (
    BadCredentials,
    PermissionDenied,
    Unauthenticated,
    UnknownPrincipal,
    ValidationFailed,
)

ACTIONS = ("read", "write", "execute", "admin", "grant")

ROLE_ACTIONS = {
    "reader": frozenset({"read"}),
    "writer": frozenset({"read", "write"}),
    "admin": frozenset({"read", "write", "execute", "admin", "grant"}),
    "executor": frozenset({"execute"}),
}

RESOURCE_KINDS = ("platform", "project", "dataset", "working_set", "algorithm", "subscription")

PLATFORM = ("platform", "*")


@dataclass
class Principal:
    name: str
    kind: str = "user"  # user | team | service
    member_of: tuple = ()
    credential_hash: str | None = None
    principal_id: str = field(default_factory=lambda: new_id("pr"))

    def to_json(self):
        return {
            "principal_id": self.principal_id,
            "name": self.name,
            "kind": self.kind,
            "member_of": list(self.member_of),
        }


@dataclass
class Policy:
    principal_id: str
    role: str
    resource: tuple  # (kind, id-or-"*")
    effect: str = "allow"
    policy_id: str = field(default_factory=lambda: new_id("pol"))

    def __post_init__(self):
        if self.role not in ROLE_ACTIONS:
            raise ValidationFailed(f"unknown role {self.role!r}")
        if self.effect not in ("allow", "deny"):
            raise ValidationFailed(f"unknown effect {self.effect!r}")
        if self.resource[0] not in RESOURCE_KINDS:
            raise ValidationFailed(f"unknown resource kind {self.resource[0]!r}")

    def to_json(self):
        return {
            "policy_id": self.policy_id,
            "principal_id": self.principal_id,
            "role": self.role,
            "resource": {"kind": self.resource[0], "id": self.resource[1]},
            "effect": self.effect,
        }


@dataclass(frozen=True)
class SessionToken:
    token: str
    principal_id: str
    issued_at: datetime
    expires_at: datetime


@dataclass(frozen=True)
class Decision:
    allow: bool
    reason: str


def hash_secret(secret: str, salt: bytes | None = None) -> str:
    salt = salt or os.urandom(16)
    h = hashlib.scrypt(secret.encode("utf-8"), salt=salt, n=2 ** 14, r=8, p=1)
    return salt.hex() + "$" + h.hex()


def verify_secret(secret: str, stored: str) -> bool:
    try:
        salt_hex, h_hex = stored.split("$", 1)
    except ValueError:
        return False
    h = hashlib.scrypt(secret.encode("utf-8"), salt=bytes.fromhex(salt_hex), n=2 ** 14, r=8, p=1)
    return secrets.compare_digest(h.hex(), h_hex)


class AccessControl:
    """Policy store plus pure decision procedure.

    ``scope_resolver(resource) -> [resource, ..enclosing.., platform]``
    is injected so this module stays free of storage knowledge.
    """

    def __init__(self, scope_resolver, session_ttl_hours: float = 8.0,
                 allow_public_read: bool = False):
        self._lock = threading.RLock()
        self._scope_resolver = scope_resolver
        self.session_ttl_hours = session_ttl_hours
        self.allow_public_read = allow_public_read
        self._principals: dict[str, Principal] = {}
        self._by_name: dict[str, str] = {}
        self._policies: dict[str, Policy] = {}
        self._sessions: dict[str, SessionToken] = {}
        self._public_datasets: set[str] = set()

    # -- principals -----------------------------------------------------

    def add_principal(self, name: str, kind: str = "user", secret: str | None = None,
                      member_of: tuple = ()) -> Principal:
        with self._lock:
            if name in self._by_name:
                raise ValidationFailed(f"principal name {name!r} already used")
            for team in member_of:
                if team not in self._principals or self._principals[team].kind != "team":
                    raise UnknownPrincipal(f"no team {team}")
            if kind == "team" and member_of:
                raise ValidationFailed("teams cannot be members of teams")
            p = Principal(name=name, kind=kind, member_of=tuple(member_of),
                          credential_hash=hash_secret(secret) if secret else None)
            self._principals[p.principal_id] = p
            self._by_name[name] = p.principal_id
            return p

    def principal(self, principal_id: str) -> Principal:
        with self._lock:
            try:
                return self._principals[principal_id]
            except KeyError:
                raise UnknownPrincipal(f"no principal {principal_id}")

    def principal_by_name(self, name: str) -> Principal | None:
        with self._lock:
            pid = self._by_name.get(name)
            return self._principals.get(pid) if pid else None

    def mark_public(self, dataset_id: str):
        with self._lock:
            self._public_datasets.add(dataset_id)

    # -- sessions -------------------------------------------------------

    def authenticate(self, name: str, secret: str) -> SessionToken:
        p = self.principal_by_name(name)
        if p is None or p.credential_hash is None or not verify_secret(secret, p.credential_hash):
            # identical message for unknown user vs wrong secret
            raise BadCredentials("invalid name or secret")
        now = utcnow()
        tok = SessionToken(
            token=secrets.token_hex(32),
            principal_id=p.principal_id,
            issued_at=now,
            expires_at=now + timedelta(hours=self.session_ttl_hours),
        )
        with self._lock:
            self._sessions[tok.token] = tok
        return tok

    def resolve_token(self, token: str) -> str:
        with self._lock:
            tok = self._sessions.get(token)
        if tok is None:
            raise Unauthenticated("unknown session token")
        if tok.expires_at <= utcnow():
            raise Unauthenticated("session expired")
        return tok.principal_id

    # -- policy -----------------------------------------------------------

    def add_policy(self, policy: Policy) -> str:
        with self._lock:
            if policy.principal_id not in self._principals:
                raise UnknownPrincipal(f"no principal {policy.principal_id}")
            self._policies[policy.policy_id] = policy
            return policy.policy_id

    def grant(self, policy: Policy, actor: str) -> str:
        self.require(actor, "grant", policy.resource)
        return self.add_policy(policy)

    def policies(self):
        with self._lock:
            return list(self._policies.values())

    # -- decisions --------------------------------------------------------

    def check(self, principal_id: str, action: str, resource: tuple) -> Decision:
        if action not in ACTIONS:
            raise ValidationFailed(f"unknown action {action!r}")
        with self._lock:
            p = self._principals.get(principal_id)
            subjects = {principal_id}
            if p is not None:
                subjects.update(p.member_of)
            policies = list(self._policies.values())
            public = resource[0] == "dataset" and resource[1] in self._public_datasets
        scopes = self._scope_resolver(resource)
        matched_allow = None
        for pol in policies:
            if pol.principal_id not in subjects:
                continue
            if action not in ROLE_ACTIONS[pol.role]:
                continue
            if not any(_resource_match(pol.resource, s) for s in scopes):
                continue
            if pol.effect == "deny":
                return Decision(False, f"denied by policy {pol.policy_id}")
            matched_allow = pol
        if matched_allow is not None:
            return Decision(True, f"allowed by policy {matched_allow.policy_id}")
        if public and action == "read" and self.allow_public_read:
            return Decision(True, "public dataset read")
        return Decision(False, "default deny")

    def require(self, principal_id: str, action: str, resource: tuple):
        d = self.check(principal_id, action, resource)
        if not d.allow:
            raise PermissionDenied(f"{action} on {resource[0]}:{resource[1]}: {d.reason}")

    def effective_permissions(self, principal_id: str, resource: tuple) -> set:
        return {a for a in ACTIONS if self.check(principal_id, a, resource).allow}


def _resource_match(policy_res: tuple, resource: tuple) -> bool:
    kind, rid = policy_res
    return kind == resource[0] and (rid == "*" or rid == resource[1])
