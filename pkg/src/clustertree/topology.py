"""Radio visibility between nodes: the close/range relations and generators."""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field

MAX_ENUMERATION_NODES = 4


class TopologyError(ValueError):
    pass


class SignalClass(enum.Enum):
    CLOSE = "close"
    FAR = "far"
    OUT_OF_RANGE = "out-of-range"


def _norm(pairs) -> frozenset[tuple[int, int]]:
    return frozenset((min(a, b), max(a, b)) for a, b in pairs)


@dataclass(frozen=True)
class Topology:
    """Static radio graph over nodes ``1..n``.

    ``close`` and ``range`` hold unordered pairs stored as ``(low, high)``.
    """

    n: int
    close: frozenset[tuple[int, int]] = frozenset()
    range: frozenset[tuple[int, int]] = frozenset()
    _reach: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        close, rng = _norm(self.close), _norm(self.range)
        object.__setattr__(self, "close", close)
        object.__setattr__(self, "range", rng)
        if self.n < 1:
            raise TopologyError("a topology needs at least one node")
        for a, b in close | rng:
            if a == b:
                raise TopologyError(f"pair ({a}, {b}) is reflexive")
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise TopologyError(f"pair ({a}, {b}) references a node outside 1..{self.n}")
        both = close & rng
        if both:
            a, b = min(both)
            raise TopologyError(f"pair ({a}, {b}) is both close and in range")
        reach = [set() for _ in range(self.n + 1)]
        for a, b in close | rng:
            reach[a].add(b)
            reach[b].add(a)
        object.__setattr__(self, "_reach", tuple(frozenset(r) for r in reach))

    @classmethod
    def from_pairs(cls, n: int, close=(), range=()) -> "Topology":
        return cls(n, frozenset(close), frozenset(range))

    def neighbours(self, node: int) -> frozenset[int]:
        return self._reach[node]

    def reachable(self, a: int, b: int) -> bool:
        return b in self._reach[a]

    def is_close(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.close

    def edges(self) -> int:
        return len(self.close) + len(self.range)

    def describe(self) -> str:
        cl = " ".join(f"{a}-{b}" for a, b in sorted(self.close)) or "none"
        rg = " ".join(f"{a}~{b}" for a, b in sorted(self.range)) or "none"
        return f"n={self.n} close[{cl}] range[{rg}]"


def classify(t: Topology, sender: int, receiver: int) -> SignalClass:
    for node in (sender, receiver):
        if not 1 <= node <= t.n:
            raise TopologyError(f"node {node} outside 1..{t.n}")
    if sender == receiver:
        raise TopologyError("a node does not classify itself")
    key = (min(sender, receiver), max(sender, receiver))
    if key in t.close:
        return SignalClass.CLOSE
    if key in t.range:
        return SignalClass.FAR
    return SignalClass.OUT_OF_RANGE


def components(t: Topology, nodes=None) -> list[set[int]]:
    """Connected components of the reachability graph restricted to ``nodes``."""
    keep = set(range(1, t.n + 1)) if nodes is None else set(nodes)
    seen: set[int] = set()
    out = []
    for start in sorted(keep):
        if start in seen:
            continue
        comp = {start}
        todo = deque([start])
        while todo:
            u = todo.popleft()
            for v in t.neighbours(u):
                if v in keep and v not in comp:
                    comp.add(v)
                    todo.append(v)
        seen |= comp
        out.append(comp)
    return out


def is_well_connected(t: Topology) -> bool:
    return len(components(t)) == 1


def enumerate_well_connected(n: int) -> list[Topology]:
    """All connected topologies on ``n`` labelled nodes.

    Each unordered pair is absent, close or in range; assignments are visited
    in lexicographic order over the pairs ``(1,2), (1,3), ..., (n-1,n)`` with
    absent < close < range.
    """
    if n < 1:
        raise TopologyError("n must be positive")
    if n > MAX_ENUMERATION_NODES:
        raise TopologyError(f"enumeration is limited to {MAX_ENUMERATION_NODES} nodes")
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    found = []
    for kinds in itertools.product((0, 1, 2), repeat=len(pairs)):
        close = [p for p, k in zip(pairs, kinds) if k == 1]
        rng = [p for p, k in zip(pairs, kinds) if k == 2]
        t = Topology.from_pairs(n, close, rng)
        if is_well_connected(t):
            found.append(t)
    return found


def balanced_binary_tree(h: int) -> Topology:
    """Complete binary tree of height ``h`` in level order; every edge is in range."""
    if h < 0:
        raise TopologyError("height must be non-negative")
    n = 2 ** (h + 1) - 1
    edges = [(i, c) for i in range(1, n + 1) for c in (2 * i, 2 * i + 1) if c <= n]
    return Topology.from_pairs(n, range=edges)


def diameter(t: Topology) -> int:
    best = 0
    for s in range(1, t.n + 1):
        dist = {s: 0}
        todo = deque([s])
        while todo:
            u = todo.popleft()
            for v in t.neighbours(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    todo.append(v)
        best = max(best, max(dist.values()))
    return best
