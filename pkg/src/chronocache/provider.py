"""Service provider: key distribution, lazy per-cover encryption, ConTbl.

The provider owns the authoritative current period.  A content request for
``(c_name, node)`` is honoured only while ``node`` belongs to the cover of
the current period; the matching entry is encrypted on first use and then
memoised, so repeated requests return the same tag and ciphertext.
"""

from __future__ import annotations

import logging
import secrets
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from . import crypto_core
from .crypto_core import NodeKeySet
from .errors import NoEntryError, NotFoundError, ValidationError
from .time_tree import TreeParams, check_node, check_period, comp_subtree, path

log = logging.getLogger(__name__)


@dataclass
class ContentRecord:
    c_name: str
    content: bytes
    entries: Dict[int, Tuple[bytes, bytes]] = field(default_factory=dict)


@dataclass
class ConTbl:
    by_name: Dict[str, ContentRecord] = field(default_factory=dict)
    by_tag: Dict[bytes, Tuple[str, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.by_tag)

    def entry_count(self, c_name: str) -> int:
        rec = self.by_name.get(c_name)
        return len(rec.entries) if rec else 0


class Provider:
    """Service-provider state with thread-safe request handlers."""

    def __init__(self, params: TreeParams, keyset: NodeKeySet, mac_key: bytes,
                 catalog: Optional[Mapping[str, bytes]] = None, *,
                 t_curr: int = 1, nonce_bits: int = 128,
                 aead: crypto_core.Aead = crypto_core.DEFAULT_AEAD):
        if keyset.params != params:
            raise ValidationError("key set was generated for a different tree")
        if nonce_bits not in crypto_core.NONCE_BITS_CHOICES:
            raise ValidationError(f"nonce_bits must be one of {crypto_core.NONCE_BITS_CHOICES}")
        self.params = params
        self.keyset = keyset
        self.mac_key = crypto_core.check_key(mac_key, "MAC key")
        self.nonce_bits = nonce_bits
        self.aead = aead
        # registered contents; ``catalog`` may be a lazy mapping and is consulted after it
        self.catalog: Dict[str, bytes] = {}
        self._source: Optional[Mapping[str, bytes]] = catalog
        self.contbl = ConTbl()
        self._t_curr = check_period(params, t_curr)
        self._lock = threading.Lock()

    @classmethod
    def create(cls, m: int, catalog: Optional[Mapping[str, bytes]] = None,
               entropy=secrets.token_bytes, **kwargs) -> "Provider":
        params = TreeParams(m)
        keyset = crypto_core.keygen(params, entropy)
        return cls(params, keyset, crypto_core.gen_mac_key(entropy), catalog, **kwargs)

    @property
    def t_curr(self) -> int:
        return self._t_curr

    def current_cover(self) -> frozenset:
        return comp_subtree(self.params, self._t_curr - 1)

    # -- key distribution ---------------------------------------------------

    def send_key(self, user_id: str, t: int) -> List[Tuple[int, bytes]]:
        """Path keys for a user whose rights run until period ``t``, leaf first."""
        check_period(self.params, t)
        log.debug("issuing %d path keys to %r for t=%d", self.params.m + 1, user_id, t)
        return [(j, self.keyset[j]) for j in path(self.params, t)]

    # -- table management ---------------------------------------------------

    def _content(self, c_name: str) -> bytes:
        content = self.catalog.get(c_name)
        if content is None and self._source is not None:
            content = self._source.get(c_name)
        if content is None:
            raise NotFoundError(f"unknown content {c_name!r}")
        return content

    def _materialize(self, c_name: str, content: bytes, node: int) -> bytes:
        # caller holds self._lock
        rec = self.contbl.by_name.get(c_name)
        if rec is None:
            rec = self.contbl.by_name[c_name] = ContentRecord(c_name, content)
        entry = rec.entries.get(node)
        if entry is not None:
            return entry[0]
        tag = crypto_core.derive_tag(self.mac_key, content, node)
        ct = crypto_core.encrypt(self.keyset[node], tag, content,
                                 nonce_bits=self.nonce_bits, aead=self.aead)
        rec.entries[node] = (tag, ct)
        self.contbl.by_tag[tag] = (c_name, node)
        return tag

    def add_contents(self, contents: Mapping[str, bytes]) -> None:
        """Register contents without encrypting anything yet."""
        with self._lock:
            for c_name, content in contents.items():
                if not content:
                    raise ValidationError(f"content {c_name!r} is empty")
                self.catalog[c_name] = bytes(content)

    def gen_table(self, contents: Iterable[Tuple[str, bytes, int]]) -> ConTbl:
        """Eagerly encrypt each content under every cover node of its period."""
        contents = list(contents)
        names = [c[0] for c in contents]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate c_name in gen_table input")
        with self._lock:
            for c_name, content, t_i in contents:
                if c_name in self.catalog or c_name in self.contbl.by_name:
                    raise ValidationError(f"duplicate c_name {c_name!r}")
                check_period(self.params, t_i)
                if not content:
                    raise ValidationError(f"content {c_name!r} is empty")
            for c_name, content, t_i in contents:
                self.catalog[c_name] = bytes(content)
                for node in sorted(comp_subtree(self.params, t_i - 1)):
                    self._materialize(c_name, bytes(content), node)
        return self.contbl

    # -- protocol handlers --------------------------------------------------

    def handle_content_request(self, c_name: str, node: int) -> bytes:
        """Return the tag of ``c_name`` under ``node``, encrypting on first use."""
        check_node(self.params, node)
        content = self._content(c_name)
        if node not in self.current_cover():
            raise NoEntryError(f"node {node} is not in the cover for period {self._t_curr}")
        rec = self.contbl.by_name.get(c_name)
        if rec is not None:
            entry = rec.entries.get(node)
            if entry is not None:
                return entry[0]
        with self._lock:
            # the period may have moved while we waited
            if node not in self.current_cover():
                raise NoEntryError(f"node {node} is not in the cover for period {self._t_curr}")
            return self._materialize(c_name, content, node)

    def handle_cache_request(self, tag: bytes) -> bytes:
        crypto_core.check_tag(tag)
        ref = self.contbl.by_tag.get(tag)
        if ref is None:
            raise NotFoundError("unknown tag")
        c_name, node = ref
        return self.contbl.by_name[c_name].entries[node][1]

    def advance_period(self, t_new: int) -> int:
        check_period(self.params, t_new)
        with self._lock:
            if t_new < self._t_curr:
                raise ValidationError(f"cannot move back from period {self._t_curr} to {t_new}")
            if t_new != self._t_curr:
                log.info("period %d -> %d, cover %s", self._t_curr, t_new,
                         sorted(comp_subtree(self.params, t_new - 1)))
            self._t_curr = t_new
        return self._t_curr
