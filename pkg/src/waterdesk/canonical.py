"""Canonical JSON serialization and content digests.

The canonical form is the digest input for records, so it must be
byte-stable: object keys sorted bytewise ascending, no insignificant
whitespace, numbers in shortest round-trip decimal form, timestamps as
ISO 8601 UTC with a ``Z`` suffix, strings NFC-normalized.
"""

from __future__ import annotations

import hashlib
import math
import unicodedata
from datetime import datetime, timezone


def canonical_timestamp(dt: datetime) -> str:
    """UTC ISO 8601 with Z; sub-second digits only when nonzero."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f").rstrip("0") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            specials = {"\b": "\\b", "\f": "\\f", "\n": "\\n", "\r": "\\r", "\t": "\\t"}
            out.append(specials.get(ch, f"\\u{ord(ch):04x}"))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _number(x) -> str:
    if isinstance(x, bool):  # guard: bool is an int subclass
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError("non-finite numbers are not serializable")
    return repr(float(x))  # repr() is the shortest round-trip form in py3


def canonical_json(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return _number(value)
    if isinstance(value, str):
        return _escape(unicodedata.normalize("NFC", value))
    if isinstance(value, datetime):
        return _escape(canonical_timestamp(value))
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in value) + "]"
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: kv[0].encode("utf-8"))
        return "{" + ",".join(
            _escape(unicodedata.normalize("NFC", k)) + ":" + canonical_json(v)
            for k, v in items
        ) + "}"
    raise TypeError(f"not canonically serializable: {type(value).__name__}")


def digest(value) -> str:
    """Hex SHA-256 of the canonical UTF-8 bytes."""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()
