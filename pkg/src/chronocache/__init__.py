"""End-to-end encrypted caching with time-dependent access control."""

from .cache_server import CacheServer, CacheStats, CacheTbl
from .client import Client, KeyRing, request_content, verify_ring
from .crypto_core import NodeKeySet, decrypt, derive_tag, encrypt, keygen, nonce_from_tag
from .errors import (ChronoCacheError, DecryptionError, NoEntryError, NotFoundError,
                     RevokedError, StalePeriodError, UpstreamError, ValidationError)
from .provider import ConTbl, Provider
from .time_tree import TreeParams, comp_subtree, eligible_node, path

__version__ = "0.1.0"
