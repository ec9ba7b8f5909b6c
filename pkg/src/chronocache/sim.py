"""Workload simulator for the cache-hit-ratio experiment.

Users are spread evenly over the leaves of the time tree.  In every period
each user issues a fixed number of Zipf-distributed content requests;
users whose rights have lapsed abort locally and are tallied as revoked
attempts.  One fresh cache server per capacity is driven through all
periods, with its counters reset at each period boundary.

Two engines produce the same rows:

* ``protocol`` runs real providers, cache servers and clients (in-process
  or over HTTP), encrypting, fetching and decrypting every request;
* ``kernel`` replays the equivalent (content, node) key trace through the
  LRU kernel only, which is far faster and used for parameter sweeps.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np

from . import crypto_core, kernels
from .cache_server import CacheServer
from .client import Client, ring_from_provider
from .errors import RevokedError, ValidationError
from .provider import Provider
from .time_tree import TreeParams, comp_subtree, eligible_node
from .transport import LocalCacheLink, LocalProviderLink

log = logging.getLogger(__name__)

CSV_HEADER = ["period", "capacity", "requests", "revoked_attempts", "hits", "hit_ratio",
              "upstream_bytes", "cover_size", "duplicated_entries"]


@dataclass
class SimConfig:
    m: int = 4
    n_users: int = 2048
    n_contents: int = 65535
    requests_per_user_per_period: int = 64
    capacities: List[int] = field(default_factory=lambda: [4096, 8192, 16384])
    zipf_s: float = 3.0
    zipf_v: float = 3000.0
    content_size_bytes: int = 1024
    seed: int = 0
    mode: str = "in-process"
    engine: str = "protocol"
    workers: int = 1
    nonce_bits: int = 128

    def __post_init__(self):
        TreeParams(self.m)
        for name in ("n_users", "n_contents", "requests_per_user_per_period",
                     "content_size_bytes", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not self.capacities or any(c < 1 for c in self.capacities):
            raise ValidationError("capacities must be a non-empty list of positive ints")
        if not self.zipf_s > 1 or not self.zipf_v >= 1:
            raise ValidationError("zipf requires s > 1 and v >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.mode not in ("in-process", "networked"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.engine not in ("protocol", "kernel"):
            raise ValidationError(f"unknown engine {self.engine!r}")
        if self.engine == "kernel" and self.mode != "in-process":
            raise ValidationError("the kernel engine only runs in-process")

    @property
    def params(self) -> TreeParams:
        return TreeParams(self.m)

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SimConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricsRow:
    period: int
    capacity: int
    requests: int
    revoked_attempts: int
    hits: int
    hit_ratio: float
    upstream_bytes: int
    cover_size: int
    duplicated_entries: int


# -- workload ---------------------------------------------------------------

class ZipfSampler:
    """Draws k in [0, n) with P(k) proportional to (v + k) ** -s by CDF inversion."""

    def __init__(self, s: float, v: float, n: int):
        if not s > 1:
            raise ValidationError("zipf s must exceed 1")
        if not v >= 1:
            raise ValidationError("zipf v must be >= 1")
        if n < 1:
            raise ValidationError("zipf support size must be >= 1")
        self.s, self.v, self.n = s, v, n
        weights = (v + np.arange(n, dtype=np.float64)) ** -s
        cdf = np.cumsum(weights)
        self.total = cdf[-1]
        self.cdf = cdf / self.total

    def pmf(self, k) -> np.ndarray:
        return (self.v + np.asarray(k, dtype=np.float64)) ** -self.s / self.total

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        return np.minimum(np.searchsorted(self.cdf, u, side="right"), self.n - 1)

    def draw(self, u: float) -> int:
        return min(int(np.searchsorted(self.cdf, u, side="right")), self.n - 1)


@lru_cache(maxsize=8)
def _sampler(s: float, v: float, n: int) -> ZipfSampler:
    return ZipfSampler(s, v, n)


def zipf_sample(s: float, v: float, n: int, rng) -> int:
    """One Zipf draw; ``rng`` is anything with a ``random()`` method."""
    return _sampler(float(s), float(v), int(n)).draw(rng.random())


def assign_users(config: SimConfig) -> Dict[int, int]:
    """Map user index to access period, spreading users evenly over the leaves."""
    t_max = config.params.t_max
    order = np.random.default_rng([config.seed, 1]).permutation(config.n_users)
    return {int(u): i % t_max + 1 for i, u in enumerate(order)}


def period_trace(config: SimConfig, t: int):
    """(user index, content index) arrays for every request issued in period ``t``."""
    n = config.n_users * config.requests_per_user_per_period
    users = np.arange(n, dtype=np.int64) % config.n_users
    rng = np.random.default_rng([config.seed, 2, t])
    contents = _sampler(config.zipf_s, config.zipf_v, config.n_contents).sample(rng, n)
    return users, contents.astype(np.int64)


def content_name(i: int) -> str:
    return f"c{i:06d}"


class ContentSource(Mapping):
    """Lazily generated pseudorandom catalog, stable for a given seed."""

    def __init__(self, n: int, size: int, seed: int):
        self.n, self.size, self.seed = n, size, seed
        self._memo: Dict[str, bytes] = {}

    def _index(self, name: str) -> Optional[int]:
        if len(name) != 7 or name[0] != "c" or not name[1:].isdigit():
            return None
        i = int(name[1:])
        return i if i < self.n else None

    def __getitem__(self, name: str) -> bytes:
        data = self._memo.get(name)
        if data is None:
            i = self._index(name) if isinstance(name, str) else None
            if i is None:
                raise KeyError(name)
            data = self._memo[name] = np.random.default_rng([self.seed, 3, i]).bytes(self.size)
        return data

    def __iter__(self) -> Iterator[str]:
        return (content_name(i) for i in range(self.n))

    def __len__(self) -> int:
        return self.n


# -- engines ----------------------------------------------------------------

class _TagRecorder:
    """Provider link wrapper remembering which tags clients were handed."""

    def __init__(self, link):
        self.link = link
        self.tags = set()

    def content_request(self, c_name, node):
        tag = self.link.content_request(c_name, node)
        self.tags.add(tag)
        return tag

    def current_period(self):
        return self.link.current_period()


def _hit_ratio(hits: int, requests: int, revoked: int) -> float:
    return hits / max(1, requests - revoked)


def _run_protocol_capacity(config: SimConfig, capacity: int, assignment: Dict[int, int],
                           catalog: ContentSource, on_period=None) -> List[MetricsRow]:
    params = config.params
    provider = Provider.create(config.m, catalog,
                               entropy=crypto_core.seeded_entropy(config.seed),
                               nonce_bits=config.nonce_bits)
    servers = []
    if config.mode == "networked":
        from . import net

        sp_server = net.serve_provider(provider).start()
        sp_link = net.HttpProviderLink(sp_server.address)
        cache = CacheServer(capacity, net.HttpProviderLink(sp_server.address))
        cs_server = net.serve_cache(cache).start()
        cs_link = net.HttpCacheLink(cs_server.address)
        servers = [sp_server, cs_server]
    else:
        sp_link = LocalProviderLink(provider)
        cache = CacheServer(capacity, sp_link)
        cs_link = LocalCacheLink(cache)

    recorder = _TagRecorder(sp_link)
    clients = [Client(ring_from_provider(sp_link, f"user-{u}", assignment[u], params),
                      recorder, cs_link, nonce_bits=config.nonce_bits)
               for u in range(config.n_users)]
    user_period = np.array([assignment[u] for u in range(config.n_users)], dtype=np.int64)
    names = [content_name(i) for i in range(config.n_contents)]

    def one(u: int, c: int, t: int) -> int:
        try:
            pt = clients[u].request_content(names[c], t)
        except RevokedError:
            return 1
        if user_period[u] < t:
            raise RuntimeError(f"user {u} with rights to {user_period[u]} decrypted at {t}")
        if pt != catalog[names[c]]:
            raise RuntimeError(f"plaintext mismatch for {names[c]} at period {t}")
        return 0

    rows = []
    try:
        for t in range(1, params.t_max + 1):
            sp_link.advance(t)
            cache.reset_stats()
            recorder.tags = set()
            users, contents = period_trace(config, t)
            if config.workers == 1 or config.mode == "in-process":
                revoked = sum(one(u, c, t) for u, c in zip(users.tolist(), contents.tolist()))
            else:
                with ThreadPoolExecutor(config.workers) as pool:
                    revoked = sum(pool.map(one, users.tolist(), contents.tolist(),
                                           [t] * len(users)))
            stats = cache.stats_snapshot()
            requests = len(users)
            rows.append(MetricsRow(
                period=t, capacity=capacity, requests=requests, revoked_attempts=revoked,
                hits=stats.hits, hit_ratio=_hit_ratio(stats.hits, requests, revoked),
                upstream_bytes=stats.upstream_bytes,
                cover_size=len(comp_subtree(params, t - 1)),
                duplicated_entries=len(recorder.tags)))
            log.info("capacity %d period %d: hit ratio %.4f", capacity, t, rows[-1].hit_ratio)
            if on_period is not None:
                on_period(rows[-1], provider, frozenset(recorder.tags))
    finally:
        for s in servers:
            s.stop()
    return rows


def request_keys(config: SimConfig, t: int, assignment: Dict[int, int]):
    """Integer cache keys of the non-revoked requests in period ``t``, plus the revoked count.

    The key ``content * (n_nodes + 1) + node`` stands for the tag of that
    content under that cover node; tags are distinct exactly when keys are.
    """
    params = config.params
    node_of = np.full(params.t_max + 1, -1, dtype=np.int64)
    for tu in range(1, params.t_max + 1):
        j = eligible_node(params, tu, t)
        node_of[tu] = -1 if j is None else j
    user_period = np.array([assignment[u] for u in range(config.n_users)], dtype=np.int64)
    users, contents = period_trace(config, t)
    nodes = node_of[user_period[users]]
    ok = nodes >= 0
    keys = contents[ok] * (params.n_nodes + 1) + nodes[ok]
    return keys, int((~ok).sum())


def _run_kernel(config: SimConfig, assignment: Dict[int, int]) -> List[MetricsRow]:
    params = config.params
    key_space = config.n_contents * (params.n_nodes + 1)
    ct_size = config.content_size_bytes + crypto_core.AEAD_OVERHEAD
    caches = {c: kernels.LruReplay(c, key_space) for c in config.capacities}
    rows: Dict[int, List[MetricsRow]] = {c: [] for c in config.capacities}
    requests = config.n_users * config.requests_per_user_per_period
    for t in range(1, params.t_max + 1):
        keys, revoked = request_keys(config, t, assignment)
        distinct = int(np.unique(keys).size)
        cover_size = len(comp_subtree(params, t - 1))
        for c, lru in caches.items():
            hits = int(lru.replay(keys).sum())
            rows[c].append(MetricsRow(
                period=t, capacity=c, requests=requests, revoked_attempts=revoked, hits=hits,
                hit_ratio=_hit_ratio(hits, requests, revoked),
                upstream_bytes=(len(keys) - hits) * ct_size,
                cover_size=cover_size, duplicated_entries=distinct))
    return [r for c in config.capacities for r in rows[c]]


def run_experiment(config: SimConfig, on_period=None) -> List[MetricsRow]:
    """One row per (capacity, period), capacities in config order, periods ascending.

    ``on_period(row, provider, tags)`` is called after each period by the
    protocol engine with the tags handed to clients in that period.
    """
    assignment = assign_users(config)
    if config.engine == "kernel":
        return _run_kernel(config, assignment)
    catalog = ContentSource(config.n_contents, config.content_size_bytes, config.seed)
    rows = []
    for c in config.capacities:
        rows.extend(_run_protocol_capacity(config, c, assignment, catalog, on_period))
    return rows


def no_cache_upstream_bytes(rows: Sequence[MetricsRow], capacity: int, ct_size: int) -> int:
    """Upstream bytes if every non-revoked request went to the provider."""
    return sum((r.requests - r.revoked_attempts) * ct_size for r in rows if r.capacity == capacity)


def write_csv(rows: Sequence[MetricsRow], out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.period, r.capacity, r.requests, r.revoked_attempts, r.hits,
                    f"{r.hit_ratio:.6f}", r.upstream_bytes, r.cover_size, r.duplicated_entries])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> List[MetricsRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
    return [MetricsRow(**{k: (float(v) if k == "hit_ratio" else int(v)) for k, v in row.items()})
            for row in reader]


def print_seed(config: SimConfig) -> None:
    print(f"seed={config.seed}", file=sys.stderr)
