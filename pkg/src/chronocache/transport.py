"""In-process links between client, cache server and provider.

These mirror the HTTP clients in :mod:`chronocache.net` method for method,
so the client and cache server can be wired either way.  Each link counts
the messages it carries.
"""

from __future__ import annotations

import threading
from typing import List, Tuple

from .cache_server import CacheServer
from .provider import Provider


class _Counter:
    def __init__(self):
        self._lock = threading.Lock()
        self.messages = 0

    def _tick(self):
        with self._lock:
            self.messages += 1


class LocalProviderLink(_Counter):
    def __init__(self, provider: Provider):
        super().__init__()
        self.provider = provider

    def fetch_keys(self, user_id: str, t: int) -> Tuple[int, List[Tuple[int, bytes]]]:
        self._tick()
        return self.provider.params.m, self.provider.send_key(user_id, t)

    def content_request(self, c_name: str, node: int) -> bytes:
        self._tick()
        return self.provider.handle_content_request(c_name, node)

    def cache_request(self, tag: bytes) -> bytes:
        self._tick()
        return self.provider.handle_cache_request(tag)

    def current_period(self) -> int:
        self._tick()
        return self.provider.t_curr

    def advance(self, t: int) -> int:
        self._tick()
        return self.provider.advance_period(t)


class LocalCacheLink(_Counter):
    def __init__(self, cache: CacheServer):
        super().__init__()
        self.cache = cache

    def content(self, tag: bytes) -> Tuple[bytes, bool]:
        self._tick()
        return self.cache.send_content(tag)
