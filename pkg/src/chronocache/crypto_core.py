"""Node keys, content tags, tag-derived nonces and AEAD encryption.

The reference suite is HMAC-SHA256 for tags and AES-256-GCM for content.
A content's tag under node ``j`` is ``HMAC(k_hmac, content || j)`` with ``j``
as an 8-byte big-endian integer.  The leading bytes of the tag serve as the
GCM nonce, so nonces never travel: both ends derive them from the tag.
"""

from __future__ import annotations

import abc
import base64
import hashlib
import hmac
import json
import random
import secrets
from pathlib import Path
from typing import Callable, Dict, Iterator, Mapping, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import DecryptionError, ValidationError
from .time_tree import TreeParams, check_node

KEY_BYTES = 32
TAG_BYTES = 32
AEAD_OVERHEAD = 16
NONCE_BITS_CHOICES = (96, 128)

Entropy = Callable[[int], bytes]


def b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str) -> bytes:
    if not isinstance(text, str):
        raise ValidationError("expected a base64url string")
    try:
        return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad base64url: {exc}") from None


def check_key(key: bytes, what: str = "key") -> bytes:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_BYTES:
        raise ValidationError(f"{what} must be {KEY_BYTES} bytes")
    return bytes(key)


class NodeKeySet(Mapping[int, bytes]):
    """Immutable map from every node id of the tree to its content key."""

    def __init__(self, params: TreeParams, keys: Mapping[int, bytes]):
        expected = set(params.nodes())
        if set(keys) != expected:
            raise ValidationError(
                f"key set must cover nodes 1..{params.n_nodes} exactly")
        self.params = params
        self._keys: Dict[int, bytes] = {j: check_key(k) for j, k in sorted(keys.items())}

    def __getitem__(self, node: int) -> bytes:
        return self._keys[node]

    def __iter__(self) -> Iterator[int]:
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def to_json(self) -> dict:
        return {"m": self.params.m,
                "keys": {str(j): b64url_encode(k) for j, k in self._keys.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "NodeKeySet":
        try:
            params = TreeParams(int(obj["m"]))
            keys = {int(j): b64url_decode(k) for j, k in obj["keys"].items()}
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ValidationError(f"malformed key file: {exc}") from None
        return cls(params, keys)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NodeKeySet":
        return cls.from_json(json.loads(Path(path).read_text()))


def keygen(params: TreeParams, entropy: Entropy = secrets.token_bytes) -> NodeKeySet:
    """One fresh random key per node in ``1 .. 2**(m+1) - 1``."""
    keys = {}
    for j in params.nodes():
        k = entropy(KEY_BYTES)
        if len(k) != KEY_BYTES:
            raise RuntimeError("entropy source returned a short read")
        keys[j] = k
    return NodeKeySet(params, keys)


def gen_mac_key(entropy: Entropy = secrets.token_bytes) -> bytes:
    return check_key(entropy(KEY_BYTES), "MAC key")


def save_mac_key(key: bytes, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps({"mac_key": b64url_encode(check_key(key))}) + "\n")


def load_mac_key(path: Union[str, Path]) -> bytes:
    try:
        return check_key(b64url_decode(json.loads(Path(path).read_text())["mac_key"]), "MAC key")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed MAC key file: {exc}") from None


def derive_tag(mac_key: bytes, content: bytes, node: int) -> bytes:
    if not content:
        raise ValidationError("content must be non-empty")
    if not isinstance(node, int) or node < 1:
        raise ValidationError(f"node id must be a positive integer, got {node!r}")
    return hmac.new(check_key(mac_key, "MAC key"), content + node.to_bytes(8, "big"),
                    hashlib.sha256).digest()


def check_tag(tag: bytes) -> bytes:
    if not isinstance(tag, (bytes, bytearray)) or len(tag) != TAG_BYTES:
        raise ValidationError(f"tag must be {TAG_BYTES} bytes")
    return bytes(tag)


def nonce_from_tag(tag: bytes, nonce_bits: int = 128) -> bytes:
    """Upper-order bytes of the tag: 16 by default, 12 in 96-bit mode."""
    check_tag(tag)
    if nonce_bits not in NONCE_BITS_CHOICES:
        raise ValidationError(f"nonce_bits must be one of {NONCE_BITS_CHOICES}")
    return tag[: nonce_bits // 8]


class Aead(abc.ABC):
    """Nonce-based AEAD with empty associated data."""

    overhead = AEAD_OVERHEAD

    @abc.abstractmethod
    def seal(self, key: bytes, nonce: bytes, plaintext: bytes) -> bytes:
        ...

    @abc.abstractmethod
    def open(self, key: bytes, nonce: bytes, ciphertext: bytes) -> bytes:
        """Raise DecryptionError when authentication fails."""


class AesGcm(Aead):
    def seal(self, key: bytes, nonce: bytes, plaintext: bytes) -> bytes:
        return AESGCM(key).encrypt(nonce, plaintext, None)

    def open(self, key: bytes, nonce: bytes, ciphertext: bytes) -> bytes:
        try:
            return AESGCM(key).decrypt(nonce, ciphertext, None)
        except InvalidTag:
            raise DecryptionError("authentication failed") from None


DEFAULT_AEAD = AesGcm()


def encrypt(key: bytes, tag: bytes, content: bytes, *, nonce_bits: int = 128,
            aead: Aead = DEFAULT_AEAD) -> bytes:
    return aead.seal(check_key(key), nonce_from_tag(tag, nonce_bits), content)


def decrypt(key: bytes, tag: bytes, ct: bytes, *, nonce_bits: int = 128,
            aead: Aead = DEFAULT_AEAD) -> bytes:
    if len(ct) < aead.overhead:
        raise DecryptionError("ciphertext shorter than the authentication tag")
    return aead.open(check_key(key), nonce_from_tag(tag, nonce_bits), ct)


def seeded_entropy(seed: int) -> Entropy:
    """Deterministic byte source for reproducible simulations. Not for real keys."""
    rng = random.Random(seed)
    return rng.randbytes
