"""JSON message schemas for the provider, cache server and client.

Byte strings travel as unpadded base64url except tags, which are 64
lowercase hex characters.  Decoders ignore unknown fields and raise
ValidationError on anything malformed.  No message on the client -> cache
path carries a user identity.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, fields
from typing import Any, ClassVar, Dict, List, Tuple, Type, TypeVar

from .crypto_core import KEY_BYTES, TAG_BYTES, b64url_decode, b64url_encode
from .errors import ErrorCode, ValidationError

_HEX_TAG = re.compile(r"[0-9a-f]{%d}" % (2 * TAG_BYTES))
_B64URL = re.compile(r"[A-Za-z0-9_-]*")

M = TypeVar("M", bound="Message")


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def loads(data) -> Dict[str, Any]:
    try:
        obj = json.loads(data)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"malformed JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ValidationError("expected a JSON object")
    return obj


def _field(obj: Dict[str, Any], name: str, kind):
    if name not in obj:
        raise ValidationError(f"missing field {name!r}")
    value = obj[name]
    # bool is an int subclass; reject it where an int is expected
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ValidationError(f"field {name!r} has wrong type")
    return value


def _pos_int(obj, name: str, minimum: int = 1) -> int:
    value = _field(obj, name, int)
    if value < minimum:
        raise ValidationError(f"field {name!r} must be >= {minimum}")
    return value


def encode_tag(tag: bytes) -> str:
    if len(tag) != TAG_BYTES:
        raise ValidationError(f"tag must be {TAG_BYTES} bytes")
    return tag.hex()


def decode_tag(text: Any) -> bytes:
    if not isinstance(text, str) or not _HEX_TAG.fullmatch(text):
        raise ValidationError(f"tag must be {2 * TAG_BYTES} lowercase hex characters")
    return bytes.fromhex(text)


def decode_b64(text: Any, name: str) -> bytes:
    if not isinstance(text, str) or not _B64URL.fullmatch(text) or len(text) % 4 == 1:
        raise ValidationError(f"field {name!r} must be unpadded base64url")
    return b64url_decode(text)


class Message:
    """Base for the request/response records below."""

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    def encode(self) -> str:
        return dumps(self.to_json())

    @classmethod
    def from_json(cls: Type[M], obj: Dict[str, Any]) -> M:
        raise NotImplementedError

    @classmethod
    def decode(cls: Type[M], data) -> M:
        return cls.from_json(loads(data))


@dataclass(frozen=True)
class KeysRequest(Message):
    user_id: str
    t: int

    @classmethod
    def from_json(cls, obj):
        return cls(_field(obj, "user_id", str), _pos_int(obj, "t"))


@dataclass(frozen=True)
class KeysResponse(Message):
    m: int
    t: int
    keys: Tuple[Tuple[int, bytes], ...]

    def to_json(self):
        return {"m": self.m, "t": self.t,
                "keys": [{"node": j, "key": b64url_encode(k)} for j, k in self.keys]}

    @classmethod
    def from_json(cls, obj):
        items = _field(obj, "keys", list)
        keys = []
        for item in items:
            if not isinstance(item, dict):
                raise ValidationError("key entries must be objects")
            key = decode_b64(_field(item, "key", str), "key")
            if len(key) != KEY_BYTES:
                raise ValidationError(f"keys must be {KEY_BYTES} bytes")
            keys.append((_pos_int(item, "node"), key))
        return cls(_pos_int(obj, "m"), _pos_int(obj, "t"), tuple(keys))


@dataclass(frozen=True)
class ContentRequest(Message):
    """Client -> provider: which content, through which cover node."""

    c_name: str
    node: int

    @classmethod
    def from_json(cls, obj):
        return cls(_field(obj, "c_name", str), _pos_int(obj, "node"))


@dataclass(frozen=True)
class TagReply(Message):
    tag: bytes

    def to_json(self):
        return {"tag": encode_tag(self.tag)}

    @classmethod
    def from_json(cls, obj):
        return cls(decode_tag(_field(obj, "tag", str)))


@dataclass(frozen=True)
class CacheRequest(Message):
    """Cache server -> provider on a miss."""

    tag: bytes

    def to_json(self):
        return {"tag": encode_tag(self.tag)}

    @classmethod
    def from_json(cls, obj):
        return cls(decode_tag(_field(obj, "tag", str)))


@dataclass(frozen=True)
class CiphertextReply(Message):
    ciphertext: bytes

    def to_json(self):
        return {"ciphertext": b64url_encode(self.ciphertext)}

    @classmethod
    def from_json(cls, obj):
        return cls(decode_b64(_field(obj, "ciphertext", str), "ciphertext"))


@dataclass(frozen=True)
class ContentFetch(Message):
    """Client -> cache server."""

    tag: bytes

    def to_json(self):
        return {"tag": encode_tag(self.tag)}

    @classmethod
    def from_json(cls, obj):
        return cls(decode_tag(_field(obj, "tag", str)))


@dataclass(frozen=True)
class ContentReply(Message):
    ciphertext: bytes
    hit: bool

    def to_json(self):
        return {"ciphertext": b64url_encode(self.ciphertext), "hit": self.hit}

    @classmethod
    def from_json(cls, obj):
        return cls(decode_b64(_field(obj, "ciphertext", str), "ciphertext"),
                   _field(obj, "hit", bool))


@dataclass(frozen=True)
class StatsReply(Message):
    hits: int
    misses: int
    hit_ratio: float
    upstream_bytes: int

    @classmethod
    def from_json(cls, obj):
        ratio = _field(obj, "hit_ratio", (int, float))
        if isinstance(ratio, bool):
            raise ValidationError("field 'hit_ratio' has wrong type")
        return cls(_pos_int(obj, "hits", 0), _pos_int(obj, "misses", 0), float(ratio),
                   _pos_int(obj, "upstream_bytes", 0))


@dataclass(frozen=True)
class AdvanceRequest(Message):
    t: int

    @classmethod
    def from_json(cls, obj):
        return cls(_pos_int(obj, "t"))


@dataclass(frozen=True)
class PeriodReply(Message):
    t_curr: int

    @classmethod
    def from_json(cls, obj):
        return cls(_pos_int(obj, "t_curr"))


@dataclass(frozen=True)
class Empty(Message):
    @classmethod
    def from_json(cls, obj):
        return cls()


# REVOKED is decided client-side and never sent
WIRE_ERROR_CODES = frozenset(c.value for c in ErrorCode) - {ErrorCode.REVOKED.value}


@dataclass(frozen=True)
class ErrorReply(Message):
    error: str
    message: str = ""

    def to_json(self):
        if self.error not in WIRE_ERROR_CODES:
            raise ValidationError(f"{self.error!r} is not a wire error code")
        d = {"error": self.error}
        if self.message:
            d["message"] = self.message
        return d

    @classmethod
    def from_json(cls, obj):
        code = _field(obj, "error", str)
        if code not in WIRE_ERROR_CODES:
            raise ValidationError(f"unknown error code {code!r}")
        message = obj.get("message", "")
        return cls(code, message if isinstance(message, str) else "")


ALL_MESSAGES: List[Type[Message]] = [
    KeysRequest, KeysResponse, ContentRequest, TagReply, CacheRequest, CiphertextReply,
    ContentFetch, ContentReply, StatsReply, AdvanceRequest, PeriodReply, Empty, ErrorReply,
]


def field_names(cls: Type[Message]) -> List[str]:
    return [f.name for f in fields(cls)]
