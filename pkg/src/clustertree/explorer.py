"""Exhaustive exploration of the formation protocol and the liveness verdict.

The goal ("every node is a cluster head or a cluster slave") must be reached
on every execution. Slot steps never deadlock, so the property fails exactly
when some cycle of non-goal states is reachable; such a cycle together with
the path leading to it is returned as a lasso counterexample.
"""

from __future__ import annotations

import enum
import itertools
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .mac import SlotOutcome
from .protocol import (
    ChoicePoint,
    NetworkState,
    StepEvent,
    advance,
    initial_state,
)
from .topology import Topology
from .types import ASSOC_HEAD, ASSOC_SLAVE, MessageType, ProtocolConfig, Role

DEFAULT_DEPTH = 256
DEFAULT_MAX_STATES = 500_000
DEFAULT_MAX_CONFIGS = 4096


def _budget(name: str, default: int) -> int:
    """Budget from the environment (``CLUSTERTREE_MAX_STATES`` and friends)."""
    return int(os.environ.get(name, default))


Resolution = tuple[int, str, int]  # (node, choice kind, chosen value)


class ResourceError(RuntimeError):
    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class WitnessAbsent(LookupError):
    pass


class FailureClass(enum.Enum):
    ACK_COLLISION = "AckCollision"
    ASSOCIATE_COLLISION = "AssociateCollision"
    NARROW_BRIDGE = "NarrowBridge"
    OTHER = "Other"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    resolutions: tuple[Resolution, ...]
    outcome: SlotOutcome
    events: tuple[StepEvent, ...]


@dataclass
class StateGraph:
    topology: Topology
    config: ProtocolConfig
    init_channels: tuple[int, ...]
    states: list[NetworkState] = field(default_factory=list)
    index: dict[NetworkState, int] = field(default_factory=dict)
    edges: list[list[Edge]] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    parent: list[Edge | None] = field(default_factory=list)
    truncated: set[int] = field(default_factory=set)
    initial: int = 0

    def goal(self, k: int) -> bool:
        return self.states[k].goal

    @property
    def complete(self) -> bool:
        return not self.truncated

    def edge_count(self) -> int:
        return sum(len(e) for e in self.edges)

    def all_edges(self) -> Iterator[Edge]:
        for out in self.edges:
            yield from out

    def _add(self, ns: NetworkState, depth: int, via: Edge | None) -> tuple[int, bool]:
        k = self.index.get(ns)
        if k is not None:
            return k, False
        k = len(self.states)
        self.states.append(ns)
        self.index[ns] = k
        self.edges.append([])
        self.depth.append(depth)
        self.parent.append(via)
        return k, True


@dataclass(frozen=True)
class Verdict:
    kind: str  # "holds" | "fails" | "inconclusive"
    stem: tuple[Edge, ...] = ()
    loop: tuple[Edge, ...] = ()
    failure_class: FailureClass | None = None
    bound: int | None = None
    loop_states: tuple[NetworkState, ...] = ()

    @property
    def holds(self) -> bool:
        return self.kind == "holds"

    @property
    def fails(self) -> bool:
        return self.kind == "fails"

    def __str__(self) -> str:
        if self.kind == "fails":
            return f"FailsWithLasso(stem={len(self.stem)}, loop={len(self.loop)}, class={self.failure_class.value})"
        if self.kind == "inconclusive":
            return f"Inconclusive(bound={self.bound})"
        return "Holds"


def successors(ns: NetworkState, t: Topology, cfg: ProtocolConfig):
    """Every resolution of the slot's choice points, in lexicographic order.

    Yields ``(resolutions, next_state, outcome, events)``.
    """
    found = []
    stack: list[tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        picks: list[int] = []
        sizes: list[int] = []
        taken: list[tuple[ChoicePoint, int]] = []

        def choose(point: ChoicePoint) -> int:
            k = len(picks)
            pick = prefix[k] if k < len(prefix) else 0
            picks.append(pick)
            sizes.append(len(point.options))
            value = point.options[pick]
            taken.append((point, value))
            return value

        nxt, outcome, events = advance(ns, t, cfg, choose)
        res = tuple((p.node, p.kind.value, v) for p, v in taken)
        found.append((tuple(picks), res, nxt, outcome, tuple(events)))
        for j in range(len(prefix), len(picks)):
            for alt in range(1, sizes[j]):
                stack.append(tuple(picks[:j]) + (alt,))
    found.sort(key=lambda item: item[0])
    for _, res, nxt, outcome, events in found:
        yield res, nxt, outcome, events


def explore(
    t: Topology,
    init_channels,
    cfg: ProtocolConfig,
    depth_bound: int = DEFAULT_DEPTH,
    max_states: int | None = None,
) -> StateGraph:
    """Breadth-first state graph from the initial configuration.

    Goal states are absorbing and not expanded. States at ``depth_bound``
    that are not goals are recorded as truncated.
    """
    if depth_bound < 1:
        raise ValueError("depth_bound must be at least 1")
    if t.n != cfg.max_id:
        raise ValueError(f"topology has {t.n} nodes but max_id is {cfg.max_id}")
    limit = _budget("CLUSTERTREE_MAX_STATES", DEFAULT_MAX_STATES) if max_states is None else max_states
    init = initial_state(list(init_channels), cfg)
    g = StateGraph(t, cfg, tuple(init_channels))
    g._add(init, 0, None)
    todo = deque([0])
    while todo:
        k = todo.popleft()
        ns = g.states[k]
        if ns.goal:
            continue
        if g.depth[k] >= depth_bound:
            g.truncated.add(k)
            continue
        seen_dst = set()
        for res, nxt, outcome, events in successors(ns, t, cfg):
            j = g.index.get(nxt)
            if j is not None and j in seen_dst:
                continue
            edge_dst = j if j is not None else len(g.states)
            edge = Edge(k, edge_dst, res, outcome, events)
            j, new = g._add(nxt, g.depth[k] + 1, edge)
            seen_dst.add(j)
            g.edges[k].append(edge)
            if new:
                todo.append(j)
            if len(g.states) > limit:
                raise ResourceError(f"state budget of {limit} exceeded", partial=g)
    return g


def _nontrivial_sccs(g: StateGraph) -> list[list[int]]:
    """Strongly connected components of the non-goal subgraph that contain a cycle."""
    n = len(g.states)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out = []
    counter = 0
    for root in range(n):
        if index[root] != -1 or g.goal(root):
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            succ = g.edges[v]
            advanced = False
            while pos < len(succ):
                w = succ[pos].dst
                pos += 1
                if g.goal(w):
                    continue
                if index[w] == -1:
                    work.append((v, pos))
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or any(e.dst == v for e in g.edges[v]):
                    out.append(sorted(comp))
    return out


def _stem(g: StateGraph, k: int) -> list[Edge]:
    path = []
    while g.parent[k] is not None:
        e = g.parent[k]
        path.append(e)
        k = e.src
    return path[::-1]


def _loop(g: StateGraph, entry: int, members: set[int]) -> list[Edge]:
    prev: dict[int, Edge] = {}
    todo = deque([entry])
    seen = {entry}
    while todo:
        v = todo.popleft()
        for e in g.edges[v]:
            if e.dst not in members:
                continue
            if e.dst == entry:
                path = [e]
                u = v
                while u != entry:
                    path.append(prev[u])
                    u = prev[u].src
                return path[::-1]
            if e.dst not in seen:
                seen.add(e.dst)
                prev[e.dst] = e
                todo.append(e.dst)
    raise AssertionError("component without a cycle")


def check_formation(g: StateGraph) -> Verdict:
    sccs = _nontrivial_sccs(g)
    if sccs:
        comp = min(sccs, key=lambda c: c[0])
        entry = comp[0]
        stem = _stem(g, entry)
        loop = _loop(g, entry, set(comp))
        v = Verdict("fails", tuple(stem), tuple(loop), loop_states=tuple(g.states[e.src] for e in loop))
        cls = classify_failure(g.topology, v, g.config)
        return Verdict("fails", v.stem, v.loop, cls, loop_states=v.loop_states)
    if g.truncated:
        return Verdict("inconclusive", bound=max(g.depth[k] for k in g.truncated))
    return Verdict("holds")


def shortest_witness(g: StateGraph) -> list[Edge]:
    """Fewest-slot path to a goal state (ties broken by resolution order)."""
    goals = [k for k in range(len(g.states)) if g.goal(k)]
    if not goals:
        raise WitnessAbsent("no goal state is reachable")
    best = min(goals, key=lambda k: (g.depth[k], k))
    return _stem(g, best)


# --- failure classification ------------------------------------------------


def stranded_behind_slaves(t: Topology, ns: NetworkState) -> bool:
    """Some unjoined node reaches a cluster head only through cluster slaves."""
    heads = {s.id for s in ns.nodes if s.role is Role.CLUSTER_HEAD}
    slaves = {s.id for s in ns.nodes if s.role is Role.CLUSTER_SLAVE}
    if not slaves:
        return False
    for s in ns.nodes:
        if s.joined:
            continue
        seen = {s.id}
        todo = deque([s.id])
        reaches_head = False
        while todo:
            u = todo.popleft()
            for v in t.neighbours(u):
                if v in heads:
                    reaches_head = True
                if v not in seen and v not in slaves and v not in heads:
                    seen.add(v)
                    todo.append(v)
        if not reaches_head and any(v in slaves for u in seen for v in t.neighbours(u)):
            return True
    return False


def _collisions(outcome: SlotOutcome):
    by_channel: dict[int, list] = {}
    for m in outcome.sent:
        if not m.is_empty:
            by_channel.setdefault(m.channel, []).append(m)
    return [msgs for msgs in by_channel.values() if len(msgs) > 1]


def classify_failure(t: Topology, v: Verdict, cfg: ProtocolConfig | None = None) -> FailureClass:
    if not v.fails:
        raise ValueError("only failing verdicts carry a failure class")
    if any(stranded_behind_slaves(t, ns) for ns in v.loop_states):
        return FailureClass.NARROW_BRIDGE
    head_assoc = ack = False
    for e in v.stem + v.loop:
        for msgs in _collisions(e.outcome):
            heads = sum(1 for m in msgs if m.mtype is MessageType.ASSOCIATE and m.payload[0] == ASSOC_HEAD)
            acks = sum(1 for m in msgs if m.mtype is MessageType.BEACON_ACK)
            slaves = sum(1 for m in msgs if m.mtype is MessageType.ASSOCIATE and m.payload[0] == ASSOC_SLAVE)
            if heads >= 2:
                head_assoc = True
            if acks >= 2 or (slaves >= 2 and (cfg is None or cfg.no_acks)):
                ack = True
    if head_assoc:
        return FailureClass.ASSOCIATE_COLLISION
    if ack:
        return FailureClass.ACK_COLLISION
    return FailureClass.OTHER


# --- sweeps ------------------------------------------------------------------


@dataclass
class SweepEntry:
    init_channels: tuple[int, ...]
    verdict: Verdict
    witness: int | None
    states: int


@dataclass
class SweepResult:
    entries: dict[tuple[int, ...], SweepEntry]

    @property
    def min_witness(self) -> int | None:
        lengths = [e.witness for e in self.entries.values() if e.witness is not None]
        return min(lengths) if lengths else None

    @property
    def min_witness_holding(self) -> int | None:
        lengths = [e.witness for e in self.entries.values() if e.witness is not None and e.verdict.holds]
        return min(lengths) if lengths else None

    def best_config(self) -> tuple[int, ...] | None:
        best = self.min_witness
        for key, e in self.entries.items():
            if e.witness is not None and e.witness == best:
                return key
        return None


def channel_assignments(cfg: ProtocolConfig):
    """Initial channel vectors with the root fixed on channel 1."""
    for rest in itertools.product(cfg.channels, repeat=cfg.max_id - 1):
        yield (1,) + rest


def sweep_initial_configs(
    t: Topology,
    cfg: ProtocolConfig,
    depth_bound: int = DEFAULT_DEPTH,
    max_configs: int | None = None,
) -> SweepResult:
    limit = _budget("CLUSTERTREE_MAX_CONFIGS", DEFAULT_MAX_CONFIGS) if max_configs is None else max_configs
    total = cfg.num_channels ** (cfg.max_id - 1)
    if total > limit:
        raise ResourceError(f"{total} initial configurations exceed the budget of {limit}")
    entries = {}
    for chans in channel_assignments(cfg):
        g = explore(t, chans, cfg, depth_bound)
        try:
            witness = len(shortest_witness(g))
        except WitnessAbsent:
            witness = None
        entries[chans] = SweepEntry(chans, check_formation(g), witness, len(g.states))
    return SweepResult(entries)
