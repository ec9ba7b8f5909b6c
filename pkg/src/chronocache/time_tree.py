"""Binary time tree and the complete-subtree cover.

Nodes use heap numbering: the root is 1 and the children of ``x`` are
``2x`` and ``2x + 1``.  With ``t_max = 2**m`` leaves, time period ``t``
lives at leaf ``2**m + t - 1``.  A user whose access rights run until
period ``t`` holds the keys on ``path(params, t)``; content released at
period ``t_curr`` is encrypted under ``comp_subtree(params, t_curr - 1)``,
i.e. with periods ``1 .. t_curr - 1`` revoked.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, Iterable, List, Optional

from .errors import ValidationError

RangeError = ValidationError


@dataclass(frozen=True)
class TreeParams:
    m: int

    def __post_init__(self):
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise RangeError(f"tree depth exponent must be an integer >= 1, got {self.m!r}")

    @property
    def t_max(self) -> int:
        return 1 << self.m

    @property
    def n_nodes(self) -> int:
        return (1 << (self.m + 1)) - 1

    @property
    def first_leaf(self) -> int:
        return 1 << self.m

    def leaf(self, t: int) -> int:
        check_period(self, t)
        return self.first_leaf + t - 1

    def period_of_leaf(self, node: int) -> int:
        if not self.is_leaf(node):
            raise RangeError(f"node {node} is not a leaf for m={self.m}")
        return node - self.first_leaf + 1

    def is_leaf(self, node: int) -> bool:
        return self.first_leaf <= node <= self.n_nodes

    def nodes(self) -> range:
        return range(1, self.n_nodes + 1)


def check_period(params: TreeParams, t: int) -> int:
    if not isinstance(t, int) or isinstance(t, bool) or not 1 <= t <= params.t_max:
        raise RangeError(f"time period {t!r} outside [1, {params.t_max}]")
    return t


def check_node(params: TreeParams, node: int) -> int:
    if not isinstance(node, int) or isinstance(node, bool) or not 1 <= node <= params.n_nodes:
        raise RangeError(f"node id {node!r} outside [1, {params.n_nodes}]")
    return node


def path(params: TreeParams, t: int) -> List[int]:
    """Nodes from the leaf of period ``t`` up to the root, leaf first."""
    x = params.leaf(t)
    nodes = []
    while x >= 1:
        nodes.append(x)
        x >>= 1
    return nodes


def comp_subtree_general(params: TreeParams, revoked: Iterable[int]) -> FrozenSet[int]:
    """Complete-subtree cover for an arbitrary set of revoked periods.

    Marks every node on the path of a revoked leaf, then collects each
    unmarked child of a marked node.  With nothing revoked the cover is
    the root alone.
    """
    marked = set()
    for t in revoked:
        marked.update(path(params, t))
    if not marked:
        return frozenset({1})
    cover = set()
    first_leaf = params.first_leaf
    for x in marked:
        if x >= first_leaf:
            continue
        for child in (2 * x, 2 * x + 1):
            if child not in marked:
                cover.add(child)
    return frozenset(cover)


@lru_cache(maxsize=4096)
def _prefix_cover(m: int, r: int) -> FrozenSet[int]:
    return comp_subtree_general(TreeParams(m), range(1, r + 1))


def comp_subtree(params: TreeParams, revoked_prefix: int) -> FrozenSet[int]:
    """Cover of the periods left after revoking ``1 .. revoked_prefix``.

    Returns the empty set when every period is revoked.
    """
    r = revoked_prefix
    if not isinstance(r, int) or isinstance(r, bool) or not 0 <= r <= params.t_max:
        raise RangeError(f"revoked prefix {r!r} outside [0, {params.t_max}]")
    return _prefix_cover(params.m, r)


def cover_for_period(params: TreeParams, t_curr: int) -> FrozenSet[int]:
    check_period(params, t_curr)
    return comp_subtree(params, t_curr - 1)


@lru_cache(maxsize=65536)
def _eligible(m: int, t_user: int, t_curr: int) -> Optional[int]:
    params = TreeParams(m)
    if t_user < t_curr:
        return None
    hits = _prefix_cover(m, t_curr - 1).intersection(path(params, t_user))
    if len(hits) != 1:
        raise AssertionError(
            f"cover meets path({t_user}) in {len(hits)} nodes at period {t_curr}")
    return next(iter(hits))


def eligible_node(params: TreeParams, t_user: int, t_curr: int) -> Optional[int]:
    """The single cover node on the user's path, or None once revoked."""
    check_period(params, t_user)
    check_period(params, t_curr)
    return _eligible(params.m, t_user, t_curr)


def leaves_under(params: TreeParams, node: int) -> range:
    """Periods whose leaves sit in the subtree rooted at ``node``."""
    check_node(params, node)
    depth = node.bit_length() - 1
    span = 1 << (params.m - depth)
    first = node * span
    return range(first - params.first_leaf + 1, first - params.first_leaf + 1 + span)
