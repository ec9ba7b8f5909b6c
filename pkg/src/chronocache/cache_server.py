"""Tag-addressed LRU cache of ciphertexts sitting in front of the provider.

The cache never holds plaintext or user identities: it maps opaque tags to
AEAD ciphertexts and fetches misses from its single upstream provider.
"""

from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Optional, Protocol, Tuple

from .crypto_core import check_tag
from .errors import ChronoCacheError, NotFoundError, UpstreamError, ValidationError

log = logging.getLogger(__name__)


class Upstream(Protocol):
    def cache_request(self, tag: bytes) -> bytes:
        ...


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    upstream_bytes: int = 0
    downstream_bytes: int = 0

    @property
    def requests(self) -> int:
        return self.hits + self.misses

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.requests if self.requests else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["hit_ratio"] = self.hit_ratio
        return d


class CacheTbl:
    """LRU map tag -> ciphertext bounded by entry count (and optionally bytes).

    Not thread-safe by itself; CacheServer serialises access.
    """

    def __init__(self, capacity: int, max_bytes: Optional[int] = None):
        if capacity < 1:
            raise ValidationError("cache capacity must be positive")
        if max_bytes is not None and max_bytes < 1:
            raise ValidationError("byte budget must be positive")
        self.capacity = capacity
        self.max_bytes = max_bytes
        self.nbytes = 0
        self._entries: "OrderedDict[bytes, bytes]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, tag: bytes) -> bool:
        return tag in self._entries

    def get(self, tag: bytes) -> Optional[bytes]:
        ct = self._entries.get(tag)
        if ct is not None:
            self._entries.move_to_end(tag)
        return ct

    def put(self, tag: bytes, ct: bytes) -> list:
        """Insert as most recent; returns the evicted tags, oldest first."""
        old = self._entries.pop(tag, None)
        if old is not None:
            self.nbytes -= len(old)
        self._entries[tag] = ct
        self.nbytes += len(ct)
        evicted = []
        while len(self._entries) > self.capacity or (
                self.max_bytes is not None and self.nbytes > self.max_bytes
                and len(self._entries) > 1):
            victim, vct = self._entries.popitem(last=False)
            self.nbytes -= len(vct)
            evicted.append(victim)
        return evicted

    def tags(self) -> list:
        """Tags from least to most recently used."""
        return list(self._entries)


class _Flight:
    __slots__ = ("done", "ct", "error")

    def __init__(self):
        self.done = threading.Event()
        self.ct: Optional[bytes] = None
        self.error: Optional[BaseException] = None


class CacheServer:
    def __init__(self, capacity: int, upstream: Upstream, max_bytes: Optional[int] = None):
        self.table = CacheTbl(capacity, max_bytes)
        self.upstream = upstream
        self._stats = CacheStats()
        self._lock = threading.Lock()
        self._inflight: dict = {}

    @property
    def capacity(self) -> int:
        return self.table.capacity

    def send_content(self, tag: bytes) -> Tuple[bytes, bool]:
        """Serve ``tag`` from the table, fetching it upstream on a miss."""
        check_tag(tag)
        with self._lock:
            ct = self.table.get(tag)
            if ct is not None:
                self._stats.hits += 1
                self._stats.downstream_bytes += len(ct)
                return ct, True
            flight = self._inflight.get(tag)
            leader = flight is None
            if leader:
                flight = self._inflight[tag] = _Flight()
        if not leader:
            flight.done.wait()
            if flight.error is not None:
                raise flight.error
            with self._lock:
                # served by another request's upstream fetch
                self._stats.hits += 1
                self._stats.downstream_bytes += len(flight.ct)
            return flight.ct, True
        try:
            ct = self._fetch(tag)
        except BaseException as exc:
            flight.error = exc
            with self._lock:
                del self._inflight[tag]
            flight.done.set()
            raise
        with self._lock:
            self.table.put(tag, ct)
            self._stats.misses += 1
            self._stats.upstream_bytes += len(ct)
            self._stats.downstream_bytes += len(ct)
            flight.ct = ct
            del self._inflight[tag]
        flight.done.set()
        return ct, False

    def _fetch(self, tag: bytes) -> bytes:
        try:
            return self.upstream.cache_request(tag)
        except NotFoundError:
            raise
        except ChronoCacheError as exc:
            if isinstance(exc, UpstreamError):
                raise
            raise UpstreamError(f"upstream answered {exc.code}: {exc.message}") from exc
        except OSError as exc:
            log.warning("upstream unreachable: %s", exc)
            raise UpstreamError(f"upstream unreachable: {exc}") from exc

    def stats_snapshot(self) -> CacheStats:
        with self._lock:
            return CacheStats(**asdict(self._stats))

    def reset_stats(self) -> None:
        with self._lock:
            self._stats = CacheStats()
