"""User agent: holds path keys and runs the content fetch flow."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Protocol, Tuple

from . import crypto_core
from .errors import NoEntryError, RevokedError, StalePeriodError
from .time_tree import TreeParams, check_period, eligible_node, path

log = logging.getLogger(__name__)


class ProviderLink(Protocol):
    def content_request(self, c_name: str, node: int) -> bytes: ...

    def current_period(self) -> int: ...


class CacheLink(Protocol):
    def content(self, tag: bytes) -> Tuple[bytes, bool]: ...


@dataclass(frozen=True)
class KeyRing:
    params: TreeParams
    t_user: int
    keys: Dict[int, bytes] = field(hash=False)

    @classmethod
    def from_keys(cls, params: TreeParams, t_user: int,
                  keys: Iterable[Tuple[int, bytes]]) -> "KeyRing":
        return cls(params, t_user, dict(keys))

    def to_json(self) -> dict:
        return {"m": self.params.m, "t": self.t_user,
                "keys": [{"node": j, "key": crypto_core.b64url_encode(k)}
                         for j, k in self.keys.items()]}

    @classmethod
    def from_json(cls, obj: dict) -> "KeyRing":
        from .wire import KeysResponse

        msg = KeysResponse.from_json(obj)
        return cls(TreeParams(msg.m), msg.t, dict(msg.keys))


def verify_ring(ring: KeyRing) -> bool:
    """True iff the ring holds exactly the 32-byte keys on Path(t_user)."""
    try:
        check_period(ring.params, ring.t_user)
    except ValueError:
        return False
    if set(ring.keys) != set(path(ring.params, ring.t_user)):
        return False
    return all(isinstance(k, bytes) and len(k) == crypto_core.KEY_BYTES
               for k in ring.keys.values())


class Client:
    def __init__(self, ring: KeyRing, sp: ProviderLink, cs: CacheLink, *,
                 nonce_bits: int = 128, aead: crypto_core.Aead = crypto_core.DEFAULT_AEAD):
        self.ring = ring
        self.sp = sp
        self.cs = cs
        self.nonce_bits = nonce_bits
        self.aead = aead

    def request_content(self, c_name: str, t_curr: int) -> bytes:
        """Fetch and decrypt ``c_name`` as of period ``t_curr``.

        Raises RevokedError without touching the network once the ring's
        period has passed.  If the provider reports NO_ENTRY the period is
        re-read once; a moved period means our ``t_curr`` was stale.
        """
        try:
            return self._fetch(c_name, t_curr)
        except NoEntryError:
            actual = self.sp.current_period()
            if actual == t_curr:
                raise
            log.info("period moved from %d to %d, retrying %r", t_curr, actual, c_name)
        try:
            return self._fetch(c_name, actual)
        except NoEntryError as exc:
            raise StalePeriodError(f"period changed during request: {exc.message}") from exc

    def _fetch(self, c_name: str, t_curr: int) -> bytes:
        node = eligible_node(self.ring.params, self.ring.t_user, t_curr)
        if node is None:
            raise RevokedError(
                f"access rights ended at period {self.ring.t_user}, now {t_curr}")
        tag = self.sp.content_request(c_name, node)
        ct, _hit = self.cs.content(tag)
        return crypto_core.decrypt(self.ring.keys[node], tag, ct,
                                   nonce_bits=self.nonce_bits, aead=self.aead)


def request_content(ring: KeyRing, c_name: str, t_curr: int, sp: ProviderLink,
                    cs: CacheLink, nonce_bits: int = 128) -> bytes:
    return Client(ring, sp, cs, nonce_bits=nonce_bits).request_content(c_name, t_curr)


def ring_from_provider(sp, user_id: str, t: int, params: Optional[TreeParams] = None) -> KeyRing:
    """Bootstrap a ring through a provider link's key endpoint."""
    m, keys = sp.fetch_keys(user_id, t)
    if params is not None and params.m != m:
        raise ValueError(f"provider tree has m={m}, expected {params.m}")
    return KeyRing.from_keys(TreeParams(m), t, keys)
