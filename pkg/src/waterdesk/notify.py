"""Publish-subscribe engine with attribute-predicate subscriptions.

Subscriptions carry a small boolean expression over the flat attribute
map of each event; matching events land in a durable delivery log that
feeds the pull API, and webhook channels get pushed with retries.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from datetime import datetime

from .canonical import canonical_timestamp
from .coretypes import new_id, utcnow
from .errors import PredicateParseError, ValidationFailed

EVENT_KINDS = (
    "data_changed",
    "provenance_changed",
    "model_changed",
    "algorithm_changed",
    "project_changed",
    "team_changed",
)

# -- predicate AST ------------------------------------------------------

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=", "contains", "prefix")
NUMERIC_OPS = {"<", "<=", ">", ">="}
STRING_OPS = {"contains", "prefix"}


@dataclass(frozen=True)
class Cmp:
    path: str
    op: str
    literal: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    inner: object


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def evaluate(node, attrs: dict) -> bool:
    if isinstance(node, Or):
        return any(evaluate(p, attrs) for p in node.parts)
    if isinstance(node, And):
        return all(evaluate(p, attrs) for p in node.parts)
    if isinstance(node, Not):
        return not evaluate(node.inner, attrs)
    if isinstance(node, Cmp):
        if node.path not in attrs:
            return False  # unknown attribute: false, not an error
        v, lit = attrs[node.path], node.literal
        if node.op in NUMERIC_OPS:
            if not (_is_number(v) and _is_number(lit)):
                return False
            return {"<": v < lit, "<=": v <= lit, ">": v > lit, ">=": v >= lit}[node.op]
        if node.op in STRING_OPS:
            if not (isinstance(v, str) and isinstance(lit, str)):
                return False
            return lit in v if node.op == "contains" else v.startswith(lit)
        if node.op == "==":
            return _eq(v, lit)
        if node.op == "!=":
            return not _eq(v, lit)
    raise TypeError(f"not a predicate node: {node!r}")


def _eq(a, b) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if _is_number(a) and _is_number(b):
        return float(a) == float(b)
    return type(a) is type(b) and a == b


# -- parser -------------------------------------------------------------

_PUNCT_OPS = ("==", "!=", "<=", ">=", "<", ">")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._run()

    def _run(self):
        t = self.text
        i = 0
        while i < len(t):
            ch = t[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            matched = False
            for op in _PUNCT_OPS:
                if t.startswith(op, i):
                    self.tokens.append(("op", op, i))
                    i += len(op)
                    matched = True
                    break
            if matched:
                continue
            if ch == '"':
                j = i + 1
                buf = []
                while j < len(t) and t[j] != '"':
                    if t[j] == "\\" and j + 1 < len(t):
                        buf.append(t[j + 1])
                        j += 2
                    else:
                        buf.append(t[j])
                        j += 1
                if j >= len(t):
                    raise PredicateParseError(i, "closing quote")
                self.tokens.append(("string", "".join(buf), i))
                i = j + 1
                continue
            if ch.isdigit() or (ch == "-" and i + 1 < len(t) and t[i + 1].isdigit()):
                j = i + 1
                while j < len(t) and (t[j].isdigit() or t[j] in ".eE+-"):
                    # stop if +/- is not part of an exponent
                    if t[j] in "+-" and t[j - 1] not in "eE":
                        break
                    j += 1
                raw = t[i:j]
                try:
                    num = int(raw)
                except ValueError:
                    try:
                        num = float(raw)
                    except ValueError:
                        raise PredicateParseError(i, "number")
                self.tokens.append(("number", num, i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i + 1
                while j < len(t) and (t[j].isalnum() or t[j] in "_."):
                    j += 1
                word = t[i:j]
                if word in ("AND", "OR", "NOT"):
                    self.tokens.append((word, word, i))
                elif word in ("contains", "prefix"):
                    self.tokens.append(("op", word, i))
                elif word == "true":
                    self.tokens.append(("bool", True, i))
                elif word == "false":
                    self.tokens.append(("bool", False, i))
                else:
                    self.tokens.append(("ident", word, i))
                i = j
                continue
            raise PredicateParseError(i, "token")
        self.tokens.append(("eof", None, len(t)))


class _Parser:
    def __init__(self, text: str):
        self.toks = _Tokenizer(text).tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise PredicateParseError(tok[2], kind)
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise PredicateParseError(tok[2], "end of input")
        return node

    def expr(self):
        parts = [self.and_()]
        while self.peek()[0] == "OR":
            self.take()
            parts.append(self.and_())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def and_(self):
        parts = [self.not_()]
        while self.peek()[0] == "AND":
            self.take()
            parts.append(self.not_())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def not_(self):
        if self.peek()[0] == "NOT":
            self.take()
            return Not(self.not_())
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok[0] == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        return self.comparison()

    def comparison(self):
        path = self.take("ident")[1]
        op_tok = self.take("op")
        lit_tok = self.peek()
        if lit_tok[0] not in ("string", "number", "bool"):
            raise PredicateParseError(lit_tok[2], "literal")
        self.take()
        return Cmp(path, op_tok[1], lit_tok[1])


def parse_predicate(text: str):
    return _Parser(text).parse()


# Attribute vocabulary used to type-check subscriptions. Attributes not
# listed here are allowed but evaluate comparisons to false at runtime.
ATTRIBUTE_TYPES = {
    "kind": "string",
    "dataset_id": "string",
    "project_id": "string",
    "working_set_id": "string",
    "algo_id": "string",
    "algorithm": "string",
    "job_id": "string",
    "actor": "string",
    "study_type": "string",
    "version": "number",
    "min_lon": "number",
    "min_lat": "number",
    "max_lon": "number",
    "max_lat": "number",
}


def type_check(node, vocab=ATTRIBUTE_TYPES):
    if isinstance(node, (And, Or)):
        for p in node.parts:
            type_check(p, vocab)
    elif isinstance(node, Not):
        type_check(node.inner, vocab)
    elif isinstance(node, Cmp):
        t = vocab.get(node.path)
        if node.op in NUMERIC_OPS:
            if t is not None and t != "number":
                raise ValidationFailed(f"numeric comparison on non-numeric attribute {node.path!r}")
            if not _is_number(node.literal):
                raise ValidationFailed(f"numeric comparison needs a number literal for {node.path!r}")
        if node.op in STRING_OPS:
            if t is not None and t != "string":
                raise ValidationFailed(f"{node.op} on non-string attribute {node.path!r}")
            if not isinstance(node.literal, str):
                raise ValidationFailed(f"{node.op} needs a string literal for {node.path!r}")


# -- events, subscriptions, deliveries ----------------------------------

@dataclass(frozen=True)
class Event:
    event_id: int
    kind: str
    attrs: dict
    occurred_at: datetime

    def to_json(self):
        return {
            "event_id": self.event_id,
            "kind": self.kind,
            "attrs": self.attrs,
            "occurred_at": canonical_timestamp(self.occurred_at),
        }


@dataclass
class Subscription:
    principal_id: str
    predicate_text: str
    predicate: object
    channel: str  # "feed" or "webhook"
    webhook_url: str | None = None
    active: bool = True
    created_at: datetime = field(default_factory=utcnow)
    sub_id: str = field(default_factory=lambda: new_id("sub"))

    def to_json(self):
        return {
            "sub_id": self.sub_id,
            "principal_id": self.principal_id,
            "predicate": self.predicate_text,
            "channel": self.channel,
            "webhook_url": self.webhook_url,
            "active": self.active,
            "created_at": canonical_timestamp(self.created_at),
        }


@dataclass
class Delivery:
    event: Event
    sub_id: str
    principal_id: str
    status: str  # delivered | suppressed | webhook_failed
    delivery_id: str = field(default_factory=lambda: new_id("dlv"))

    def to_json(self):
        return {
            "delivery_id": self.delivery_id,
            "event": self.event.to_json(),
            "subscription_id": self.sub_id,
            "status": self.status,
        }


class NotificationHub:
    """Durable event + delivery log with predicate matching.

    ``read_gate(principal_id, attrs) -> bool`` suppresses deliveries the
    subscriber is not allowed to see. ``webhook_poster(url, body) -> bool``
    is injectable for tests; pushes retry with exponential backoff.
    """

    def __init__(self, read_gate=None, webhook_poster=None,
                 webhook_retries: int = 3, backoff_base_s: float = 1.0,
                 synchronous_webhooks: bool = False):
        self._lock = threading.RLock()
        self._events: list[Event] = []
        self._subs: dict[str, Subscription] = {}
        self._deliveries: list[Delivery] = []
        self._read_gate = read_gate or (lambda principal, attrs: True)
        self._webhook_poster = webhook_poster or _default_poster
        self._webhook_retries = webhook_retries
        self._backoff_base_s = backoff_base_s
        self._synchronous_webhooks = synchronous_webhooks
        self._next_event_id = 1

    def subscribe(self, principal_id: str, predicate_text: str, channel: str = "feed",
                  webhook_url: str | None = None) -> Subscription:
        node = parse_predicate(predicate_text)
        type_check(node)
        if channel not in ("feed", "webhook"):
            raise ValidationFailed(f"unknown channel {channel!r}")
        if channel == "webhook" and not webhook_url:
            raise ValidationFailed("webhook channel requires a url")
        sub = Subscription(principal_id, predicate_text, node, channel, webhook_url)
        with self._lock:
            self._subs[sub.sub_id] = sub
        return sub

    def subscriptions(self, principal_id: str | None = None):
        with self._lock:
            subs = list(self._subs.values())
        if principal_id is not None:
            subs = [s for s in subs if s.principal_id == principal_id]
        return sorted(subs, key=lambda s: s.sub_id)

    def publish(self, kind: str, attrs: dict, occurred_at: datetime | None = None) -> int:
        """Append the event, match all active subscriptions, return the
        count of (non-suppressed) deliveries."""
        if kind not in EVENT_KINDS:
            raise ValidationFailed(f"unknown event kind {kind!r}")
        full_attrs = {"kind": kind, **attrs}
        for k in full_attrs:
            if k != k.lower():
                raise ValidationFailed(f"attribute keys must be lowercase snake case: {k!r}")
        with self._lock:
            event = Event(self._next_event_id, kind, full_attrs, occurred_at or utcnow())
            self._next_event_id += 1
            self._events.append(event)
            subs = [s for s in self._subs.values() if s.active]
        delivered = 0
        for sub in sorted(subs, key=lambda s: s.sub_id):
            if not evaluate(sub.predicate, full_attrs):
                continue
            if not self._read_gate(sub.principal_id, full_attrs):
                status = "suppressed"
            else:
                status = "delivered"
                delivered += 1
            d = Delivery(event, sub.sub_id, sub.principal_id, status)
            with self._lock:
                self._deliveries.append(d)
            if status == "delivered" and sub.channel == "webhook":
                self._push_webhook(sub, d)
        return delivered

    def _push_webhook(self, sub: Subscription, delivery: Delivery):
        body = {"event": delivery.event.to_json(), "subscription_id": sub.sub_id}

        def attempt():
            for i in range(self._webhook_retries + 1):
                if self._webhook_poster(sub.webhook_url, body):
                    return
                if i < self._webhook_retries:
                    time.sleep(self._backoff_base_s * (2 ** i))
            delivery.status = "webhook_failed"

        if self._synchronous_webhooks:
            attempt()
        else:
            threading.Thread(target=attempt, daemon=True).start()

    def feed(self, principal_id: str, since_event_id: int = 0, limit: int = 100):
        with self._lock:
            mine = [d for d in self._deliveries
                    if d.principal_id == principal_id
                    and d.status == "delivered"
                    and d.event.event_id > since_event_id]
        mine.sort(key=lambda d: d.event.event_id)
        return mine[:limit]

    def events(self):
        with self._lock:
            return list(self._events)

    def deliveries(self):
        with self._lock:
            return list(self._deliveries)


def _default_poster(url: str, body: dict) -> bool:
    import httpx

    try:
        resp = httpx.post(url, json=body, timeout=5.0)
        return 200 <= resp.status_code < 300
    except httpx.HTTPError:
        return False
