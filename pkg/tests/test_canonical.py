import unicodedata
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from waterdesk.canonical import canonical_json, canonical_timestamp, digest


def test_key_order_is_bytewise():
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    # 'Z' (0x5a) sorts before 'a' (0x61) bytewise
    assert canonical_json({"a": 1, "Z": 2}) == '{"Z":2,"a":1}'


def test_no_whitespace_and_scalar_forms():
    s = canonical_json({"x": [1, 2.5, True, False, None, "hi"]})
    assert s == '{"x":[1,2.5,true,false,null,"hi"]}'


def test_float_shortest_roundtrip():
    assert canonical_json(0.1) == "0.1"
    assert canonical_json(2.0) == "2.0"
    assert float(canonical_json(1 / 3)) == 1 / 3


def test_timestamp_utc_z():
    dt = datetime(2020, 5, 4, 12, 30, tzinfo=timezone.utc)
    assert canonical_timestamp(dt) == "2020-05-04T12:30:00Z"
    assert canonical_json({"t": dt}) == '{"t":"2020-05-04T12:30:00Z"}'


def test_string_nfc_normalized():
    decomposed = "é"  # e + combining acute
    composed = unicodedata.normalize("NFC", decomposed)
    assert canonical_json(decomposed) == canonical_json(composed)
    assert digest({"v": decomposed}) == digest({"v": composed})


def test_digest_determinism_and_sensitivity():
    a = {"site": "s1", "count": 3}
    assert digest(a) == digest({"count": 3, "site": "s1"})
    assert digest(a) != digest({"site": "s1", "count": 4})
    assert digest(a) != digest({"site": "s2", "count": 3})


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        canonical_json(float("nan"))


scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-10 ** 9, 10 ** 9),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(max_size=20),
)


@given(st.dictionaries(st.text(min_size=1, max_size=8), scalars, max_size=5))
def test_digest_equals_iff_canonical_equals(values):
    again = dict(reversed(list(values.items())))
    assert canonical_json(values) == canonical_json(again)
    assert digest(values) == digest(again)
