import json
from pathlib import Path

import pytest

from chronocache import wire
from chronocache.errors import ValidationError

GOLDEN = Path(__file__).parent / "golden"

CASES = {
    "keys_request": wire.KeysRequest,
    "keys_response": wire.KeysResponse,
    "content_request": wire.ContentRequest,
    "tag_reply": wire.TagReply,
    "cache_request": wire.CacheRequest,
    "ciphertext_reply": wire.CiphertextReply,
    "content_fetch": wire.ContentFetch,
    "content_reply": wire.ContentReply,
    "stats_reply": wire.StatsReply,
    "advance_request": wire.AdvanceRequest,
    "period_reply": wire.PeriodReply,
    "empty": wire.Empty,
    "error_not_found": wire.ErrorReply,
    "error_no_entry": wire.ErrorReply,
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_roundtrip(name):
    text = (GOLDEN / f"{name}.json").read_text().strip()
    assert CASES[name].decode(text).encode() == text


def test_golden_values():
    tag = wire.TagReply.decode((GOLDEN / "tag_reply.json").read_text()).tag
    assert tag == bytes(range(32))
    keys = wire.KeysResponse.decode((GOLDEN / "keys_response.json").read_text())
    assert [j for j, _ in keys.keys] == [9, 4, 2, 1]
    assert all(k == bytes([7]) * 32 for _, k in keys.keys)


def test_unknown_fields_ignored():
    msg = wire.ContentRequest.decode('{"c_name":"a","node":3,"future":[1,2]}')
    assert msg == wire.ContentRequest("a", 3)


@pytest.mark.parametrize("cls,payload", [
    (wire.TagReply, {"tag": "00" * 31}),
    (wire.TagReply, {"tag": "AB" * 32}),
    (wire.CacheRequest, {"tag": 5}),
    (wire.ContentRequest, {"c_name": "a", "node": 0}),
    (wire.ContentRequest, {"c_name": "a", "node": True}),
    (wire.ContentRequest, {"c_name": "a"}),
    (wire.ContentRequest, {"c_name": 3, "node": 1}),
    (wire.KeysRequest, {"user_id": "u", "t": "2"}),
    (wire.KeysResponse, {"m": 3, "t": 2, "keys": [{"node": 1, "key": "AAAA"}]}),
    (wire.CiphertextReply, {"ciphertext": "AA=="}),
    (wire.CiphertextReply, {"ciphertext": "A+/"}),
    (wire.ContentReply, {"ciphertext": "AA", "hit": 1}),
    (wire.ErrorReply, {"error": "REVOKED"}),
    (wire.ErrorReply, {"error": "TEAPOT"}),
    (wire.AdvanceRequest, {"t": 0}),
])
def test_validation_errors(cls, payload):
    with pytest.raises(ValidationError):
        cls.from_json(payload)


@pytest.mark.parametrize("raw", ["not json", "[1,2]", "", "null"])
def test_malformed_json(raw):
    with pytest.raises(ValidationError):
        wire.ContentRequest.decode(raw)


def test_revoked_never_encoded():
    with pytest.raises(ValidationError):
        wire.ErrorReply("REVOKED").encode()
    assert "REVOKED" not in wire.WIRE_ERROR_CODES


def test_no_identity_on_content_path():
    for cls in (wire.ContentRequest, wire.TagReply, wire.ContentFetch, wire.ContentReply,
                wire.CacheRequest, wire.CiphertextReply):
        names = set(wire.field_names(cls))
        assert not names & {"user_id", "id", "identity", "user"}
    for name in ("content_request", "content_fetch", "content_reply"):
        assert "user" not in json.loads((GOLDEN / f"{name}.json").read_text())


def test_every_message_has_a_golden_file():
    covered = set(CASES.values())
    assert set(wire.ALL_MESSAGES) <= covered
