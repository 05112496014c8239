"""Cluster-tree formation state machine running on top of the slot engine.

A node's behaviour in one slot is split in two halves. ``emit`` decides what
the node hands to the MAC layer (a frame, or EMPTY on the channel it listens
to). ``deliver`` consumes what the antenna picked up and produces the next
state. Nondeterminism (random back-off, scan order, channel grants) is never
resolved inside the model: it is requested from a ``chooser`` callback as a
:class:`ChoicePoint`, so the explorer can branch over every option and the
simulator can draw from a seeded generator.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, fields
from typing import Callable, Sequence, Union

from . import mac
from .topology import SignalClass, Topology, classify
from .types import (
    ASSOC_HEAD,
    ASSOC_SLAVE,
    NO_CHANNEL,
    NO_NODE,
    ROOT,
    Message,
    MessageType,
    ProtocolConfig,
    Role,
)

MT = MessageType


class Phase(enum.IntEnum):
    IDLE = 0
    LISTENING = 1
    BACKOFF = 2
    AWAIT_ACK_RESPONSE = 3
    SCANNING = 4
    RETURNED_TO_PARENT = 5
    AWAIT_ASSOCIATE_ACK = 6
    ADVERTISING = 7
    GRANTING = 8
    FORWARDING_UP = 9
    FORWARDING_DOWN = 10


class ChoiceKind(enum.Enum):
    RANDOM_WAIT = "random-wait"
    SCAN_CHANNEL = "scan-channel"
    CHANNEL_ASSIGNMENT = "channel-assignment"


@dataclass(frozen=True)
class ChoicePoint:
    node: int
    kind: ChoiceKind
    options: tuple[int, ...]
    # channel assignment only: channel the requester's parent advertises on
    via: int = 0


class ExplorationContractError(RuntimeError):
    """A step needed a choice that the supplied resolutions do not cover."""


@dataclass(frozen=True, slots=True)
class NodeState:
    id: int
    role: Role
    ch: int
    phase: Phase
    ac: int = NO_CHANNEL  # assigned channel of a cluster head
    pid: int = NO_NODE
    pc: int = NO_CHANNEL
    children: tuple[tuple[int, int], ...] = ()
    tier: int = 0
    wait: int = 0
    dwell: int = 0
    visited: tuple[int, ...] = ()
    remembered_tier: int | None = None
    pending: tuple[Message, ...] = ()
    timeout: int = 0
    # relayed association requests: (requester, requester is a direct child)
    relay: tuple[tuple[int, bool], ...] = ()
    # root only: open grant batch (requester, channel, direct) and grant history
    grants: tuple[tuple[int, int, bool], ...] = ()
    batch: int = 0
    assigned: tuple[tuple[int, int], ...] = ()

    @property
    def joined(self) -> bool:
        return self.role in (Role.CLUSTER_HEAD, Role.CLUSTER_SLAVE)

    def summary(self) -> str:
        extra = f" t{self.tier}" if self.joined else ""
        par = f" p{self.pid}" if self.pid else ""
        return f"{self.id}:{self.role.short}/{self.phase.name.lower()}@{self.ch}{extra}{par}"


_NODE_FIELDS = tuple(f.name for f in fields(NodeState))
_set = object.__setattr__


def replace(s: NodeState, **changes) -> NodeState:
    """Field-wise copy with changes; much cheaper than ``dataclasses.replace``."""
    new = object.__new__(NodeState)
    for name in _NODE_FIELDS:
        _set(new, name, changes[name] if name in changes else getattr(s, name))
    return new


@dataclass(frozen=True, slots=True)
class NetworkState:
    nodes: tuple[NodeState, ...]
    parity: int = 0

    @property
    def goal(self) -> bool:
        # deep nodes join last, so scanning from the back fails fast
        return all(s.joined for s in reversed(self.nodes))

    def node(self, i: int) -> NodeState:
        return self.nodes[i - 1]

    def joined_count(self) -> int:
        return sum(1 for s in self.nodes if s.joined)


# --- events --------------------------------------------------------------


@dataclass(frozen=True)
class Increase:
    node: int
    role: Role

    def __str__(self):
        return f"increase({self.node},{self.role.short})"


@dataclass(frozen=True)
class RoleChange:
    node: int
    old: Role
    new: Role

    def __str__(self):
        return f"role({self.node},{self.old.short}->{self.new.short})"


@dataclass(frozen=True)
class MessageSent:
    message: Message

    def __str__(self):
        return f"sent({self.message})"


@dataclass(frozen=True)
class MessageDelivered:
    node: int
    message: Message

    def __str__(self):
        return f"recv({self.node},{self.message})"


@dataclass(frozen=True)
class TimerExpired:
    node: int
    which: str

    def __str__(self):
        return f"timeout({self.node},{self.which})"


StepEvent = Union[Increase, RoleChange, MessageSent, MessageDelivered, TimerExpired]
Chooser = Callable[[ChoicePoint], int]


# --- construction ----------------------------------------------------------


def node_init(id: int, initial_channel: int, cfg: ProtocolConfig) -> NodeState:
    if id == ROOT:
        return NodeState(ROOT, Role.CLUSTER_HEAD, 1, Phase.ADVERTISING, ac=1)
    if not 1 <= initial_channel <= cfg.num_channels:
        raise ValueError(f"channel {initial_channel} outside 1..{cfg.num_channels}")
    return NodeState(id, Role.FREE, initial_channel, Phase.LISTENING)


def initial_state(init_channels: Sequence[int], cfg: ProtocolConfig) -> NetworkState:
    """``init_channels[i-1]`` is node i's channel; the root's entry is ignored."""
    if len(init_channels) != cfg.max_id:
        raise ValueError(f"need {cfg.max_id} initial channels, got {len(init_channels)}")
    return NetworkState(tuple(node_init(i, c, cfg) for i, c in enumerate(init_channels, start=1)), 0)


# --- one node, one slot ------------------------------------------------------


@functools.lru_cache(maxsize=1 << 16)
def _beacon(src: int, ch: int, tier: int) -> Message:
    return Message(src, ch, MT.BEACON, (tier,))


@functools.lru_cache(maxsize=1 << 12)
def _listen(src: int, ch: int) -> Message:
    return Message(src, ch, MT.EMPTY, ())


def emit(s: NodeState, parity: int, cfg: ProtocolConfig) -> Message:
    """The single message node ``s`` submits in a slot of the given parity."""
    if s.pending and s.wait == 0:
        return s.pending[0]
    if s.role is Role.CLUSTER_HEAD and s.phase is Phase.ADVERTISING and parity == s.tier % 2:
        return _beacon(s.id, s.ac, s.tier)
    return _listen(s.id, s.ch)


def _draw_delay(s: NodeState, cfg: ProtocolConfig, choose: Chooser) -> int:
    """Slots to hold a response back; 0 means it goes out in the next slot."""
    if not cfg.no_acks:
        return 0
    return choose(ChoicePoint(s.id, ChoiceKind.RANDOM_WAIT, tuple(range(1, cfg.max_random_wait + 1)))) - 1


def _scan_pick(s: NodeState, pc: int, visited: tuple[int, ...], cfg: ProtocolConfig, choose: Chooser):
    others = [c for c in cfg.channels if c != pc]
    if not others:
        return pc, ()
    fresh = [c for c in others if c not in visited]
    if not fresh:
        visited = ()
        fresh = others
    if len(fresh) == 1:
        pick = fresh[0]
    else:
        pick = choose(ChoicePoint(s.id, ChoiceKind.SCAN_CHANNEL, tuple(fresh)))
    return pick, visited + (pick,)


def _become(s: NodeState, role: Role, ev: list | None, **changes) -> NodeState:
    new = replace(s, role=role, **changes)
    if ev is not None and role != s.role:
        ev.append(RoleChange(s.id, s.role, role))
        if role in (Role.CLUSTER_HEAD, Role.CLUSTER_SLAVE):
            ev.append(Increase(s.id, role))
    return new


def _start_tentative(s, head, channel, tier, wait, cfg, choose, ev):
    pick, visited = _scan_pick(s, channel, (), cfg, choose)
    return _become(
        s, Role.TENTATIVE, ev,
        phase=Phase.SCANNING, pid=head, pc=channel, remembered_tier=tier,
        wait=wait, dwell=cfg.scan_dwell_slots, visited=visited, ch=pick,
        pending=(), timeout=0,
    )


def _join_as_slave(s: NodeState, head: int, channel: int, ev) -> NodeState:
    return _become(
        s, Role.CLUSTER_SLAVE, ev,
        phase=Phase.IDLE, pid=head, pc=channel, ch=channel,
        tier=s.remembered_tier + 1, wait=0, dwell=0, visited=(), timeout=0,
    )


def _with_child(children, child: int, channel: int):
    kept = [c for c in children if c[0] != child]
    return tuple(sorted(kept + [(child, channel)]))


def preferred_channel(root: NodeState, cfg: ProtocolConfig, avoid: int = 0) -> int:
    """Lowest channel never handed out, else the least recently handed out one.

    When reusing, ``avoid`` (the requester's parent channel) is skipped if
    another channel exists.
    """
    history = [root.ac] + [c for _, c in root.assigned] + [c for _, c, _ in root.grants]
    last = {c: -1 for c in cfg.channels}
    for k, c in enumerate(history):
        last[c] = k
    unused = [c for c in cfg.channels if last[c] < 0]
    if unused:
        return unused[0]
    pool = [c for c in cfg.channels if c != avoid] or list(cfg.channels)
    return min(pool, key=lambda c: (last[c], c))


def _after_send(s: NodeState, sent: Message, cfg: ProtocolConfig, ev) -> NodeState:
    """State change caused by the frame a node just transmitted."""
    if sent.mtype is MT.BEACON:
        return s
    s = replace(s, pending=s.pending[1:])
    kind = sent.mtype
    if kind is MT.BEACON_ACK:
        return replace(s, phase=Phase.AWAIT_ACK_RESPONSE, timeout=1)
    if kind is MT.ASSOCIATE:
        role_code, requester, head, _ = sent.payload
        if role_code == ASSOC_SLAVE:
            return _join_as_slave(s, head, sent.channel, ev)
        if requester == s.id:
            return replace(s, phase=Phase.AWAIT_ASSOCIATE_ACK, timeout=2 * (s.remembered_tier + 1) + 2)
        return replace(s, timeout=2 * s.tier + 2)
    if kind is MT.ASSOCIATE_ACK:
        return replace(s, phase=Phase.ADVERTISING, ch=s.ac, relay=())
    return s


def _on_message(s: NodeState, m: Message, sig: SignalClass, cfg: ProtocolConfig, choose, ev):
    """React to a frame heard while listening; ``None`` when it is ignored."""
    kind = m.mtype
    phase = s.phase

    if s.role is Role.FREE:
        if phase is Phase.LISTENING and kind is MT.BEACON:
            tier = m.payload[0]
            if sig is SignalClass.CLOSE:
                assoc = Message(s.id, s.ch, MT.ASSOCIATE, (ASSOC_SLAVE, s.id, m.src, s.ch))
                return replace(s, phase=Phase.BACKOFF, pending=(assoc,), remembered_tier=tier,
                               wait=_draw_delay(s, cfg, choose))
            if cfg.no_acks:
                return _start_tentative(s, m.src, s.ch, tier, cfg.min_tentative_slots, cfg, choose, ev)
            ack = Message(s.id, s.ch, MT.BEACON_ACK, (m.src,))
            return replace(s, phase=Phase.BACKOFF, pending=(ack,), remembered_tier=tier,
                           pid=m.src, pc=s.ch, wait=0)
        if phase is Phase.AWAIT_ACK_RESPONSE and kind is MT.ACK_RESPONSE:
            wait_time, target = m.payload
            if target == s.id and m.src == s.pid:
                return _start_tentative(s, s.pid, s.pc, s.remembered_tier, max(wait_time, 1), cfg, choose, ev)
        return None

    if s.role is Role.TENTATIVE:
        if phase is Phase.SCANNING and kind is MT.BEACON:
            if sig is SignalClass.CLOSE and m.payload[0] == s.remembered_tier:
                assoc = Message(s.id, s.ch, MT.ASSOCIATE, (ASSOC_SLAVE, s.id, m.src, s.ch))
                return replace(s, phase=Phase.BACKOFF, pending=(assoc,), wait=_draw_delay(s, cfg, choose),
                               dwell=0, visited=())
            return None
        if phase is Phase.RETURNED_TO_PARENT and kind is MT.BEACON and m.src == s.pid:
            assoc = Message(s.id, s.pc, MT.ASSOCIATE, (ASSOC_HEAD, s.id, s.pid, s.pc))
            return replace(s, phase=Phase.BACKOFF, pending=(assoc,), wait=_draw_delay(s, cfg, choose))
        if phase is Phase.AWAIT_ASSOCIATE_ACK and kind is MT.ASSOCIATE_ACK and m.src == s.pid:
            for channel, target in m.grants():
                if target == s.id:
                    return _become(
                        s, Role.CLUSTER_HEAD, ev,
                        phase=Phase.ADVERTISING, ac=channel, ch=channel,
                        tier=s.remembered_tier + 1, timeout=0, wait=0,
                    )
        return None

    if s.role is Role.CLUSTER_HEAD:
        if kind is MT.ASSOCIATE and m.payload[2] == s.id and phase in (Phase.ADVERTISING, Phase.GRANTING):
            role_code, requester, _, via = m.payload
            if role_code == ASSOC_SLAVE:
                return replace(s, children=_with_child(s.children, m.src, s.ac))
            direct = requester == m.src
            if s.id == ROOT:
                if any(g[0] == requester for g in s.grants):
                    return None
                point = ChoicePoint(s.id, ChoiceKind.CHANNEL_ASSIGNMENT, tuple(cfg.channels), via)
                channel = choose(point) if len(point.options) > 1 else point.options[0]
                grants = s.grants + ((requester, channel, direct),)
                if phase is Phase.GRANTING:
                    return replace(s, grants=grants)
                return replace(s, phase=Phase.GRANTING, grants=grants, batch=1)
            if phase is Phase.ADVERTISING and not s.pending:
                up = Message(s.id, s.pc, MT.ASSOCIATE, (ASSOC_HEAD, requester, s.pid, via))
                return replace(s, phase=Phase.FORWARDING_UP, pending=(up,), ch=s.pc,
                               relay=((requester, direct),))
            return None
        if kind is MT.BEACON_ACK and phase is Phase.ADVERTISING and m.payload[0] == s.id and not s.pending:
            resp = Message(s.id, s.ac, MT.ACK_RESPONSE, (cfg.wait_time, m.src))
            return replace(s, pending=(resp,))
        if kind is MT.ASSOCIATE_ACK and phase is Phase.FORWARDING_UP and not s.pending and m.src == s.pid:
            mine = {r: d for r, d in s.relay}
            pairs = [(c, r) for c, r in m.grants() if r in mine]
            if not pairs:
                return None
            children = s.children
            for c, r in pairs:
                if mine[r]:
                    children = _with_child(children, r, c)
            down = Message(s.id, s.ac, MT.ASSOCIATE_ACK, tuple(x for pair in pairs for x in pair))
            return replace(s, phase=Phase.FORWARDING_DOWN, pending=(down,), ch=s.ac,
                           children=children, timeout=0)
        return None
    return None


def _tick(s: NodeState, parity: int, cfg: ProtocolConfig, choose, ev) -> NodeState:
    """Advance the timers of a node that neither sent nor reacted this slot."""
    phase = s.phase
    if phase is Phase.LISTENING:
        if cfg.free_hop and parity == 1 and cfg.num_channels > 1:
            return replace(s, ch=s.ch % cfg.num_channels + 1)
        return s
    if phase is Phase.BACKOFF:
        return replace(s, wait=s.wait - 1) if s.wait > 0 else s
    if phase is Phase.SCANNING:
        wait, dwell = s.wait - 1, s.dwell - 1
        if wait <= 0:
            if ev is not None:
                ev.append(TimerExpired(s.id, "tentative"))
            return replace(s, phase=Phase.RETURNED_TO_PARENT, ch=s.pc, wait=0, dwell=0, visited=())
        if dwell <= 0:
            pick, visited = _scan_pick(s, s.pc, s.visited, cfg, choose)
            return replace(s, wait=wait, dwell=cfg.scan_dwell_slots, ch=pick, visited=visited)
        return replace(s, wait=wait, dwell=dwell)
    if phase is Phase.GRANTING:
        if s.batch > 1:
            return replace(s, batch=s.batch - 1)
        pairs = tuple(x for r, c, _ in s.grants for x in (c, r))
        children = s.children
        assigned = s.assigned
        for r, c, direct in s.grants:
            if direct:
                children = _with_child(children, r, c)
            assigned = tuple(a for a in assigned if a[0] != r) + ((r, c),)
        ack = Message(s.id, s.ac, MT.ASSOCIATE_ACK, pairs)
        return replace(s, phase=Phase.ADVERTISING, pending=(ack,), grants=(), batch=0,
                       children=children, assigned=assigned)
    if s.timeout > 0 and phase in (Phase.AWAIT_ACK_RESPONSE, Phase.AWAIT_ASSOCIATE_ACK, Phase.FORWARDING_UP):
        left = s.timeout - 1
        if left > 0:
            return replace(s, timeout=left)
        if ev is not None:
            ev.append(TimerExpired(s.id, phase.name.lower()))
        if phase is Phase.AWAIT_ACK_RESPONSE:
            return replace(s, phase=Phase.LISTENING, timeout=0, pid=NO_NODE, pc=NO_CHANNEL, remembered_tier=None)
        if phase is Phase.AWAIT_ASSOCIATE_ACK:
            return replace(s, phase=Phase.RETURNED_TO_PARENT, timeout=0, ch=s.pc)
        return replace(s, phase=Phase.ADVERTISING, timeout=0, ch=s.ac, relay=())
    return s


def deliver(
    s: NodeState,
    m: Message,
    sig: SignalClass | None,
    parity: int,
    cfg: ProtocolConfig,
    resolve: Chooser | None = None,
    *,
    record: bool = True,
) -> tuple[NodeState, list[StepEvent]]:
    """Next state of node ``s`` after a slot in which its antenna observed ``m``.

    ``sig`` is the sender's signal class (ignored for EMPTY). ``resolve``
    answers every :class:`ChoicePoint` the step raises.
    """
    choose = resolve if resolve is not None else _no_choice
    ev: list | None = [] if record else None
    sent = emit(s, parity, cfg)
    if not sent.is_empty:
        if ev is not None:
            ev.append(MessageSent(sent))
        return _after_send(s, sent, cfg, ev), ev or []
    if not m.is_empty and sig is not None and sig is not SignalClass.OUT_OF_RANGE:
        if ev is not None:
            ev.append(MessageDelivered(s.id, m))
        new = _on_message(s, m, sig, cfg, choose, ev)
        if new is not None and new.phase != s.phase:
            return new, ev or []
        if new is not None:
            s = new
    return _tick(s, parity, cfg, choose, ev), ev or []


def _no_choice(point: ChoicePoint) -> int:
    raise ExplorationContractError(f"no resolution supplied for {point}")


def choice_points(s: NodeState, m: Message, sig, parity: int, cfg: ProtocolConfig) -> list[ChoicePoint]:
    """Choice points ``deliver`` will raise for these inputs."""
    seen: list[ChoicePoint] = []

    def probe(point: ChoicePoint) -> int:
        seen.append(point)
        return point.options[0]

    deliver(s, m, sig, parity, cfg, probe, record=False)
    return seen


# --- whole network, one slot ------------------------------------------------


class SequenceChooser:
    """Answers choice points from a list of option values, in request order."""

    def __init__(self, values: Sequence[int]):
        self.values = list(values)
        self.taken: list[tuple[ChoicePoint, int]] = []

    def __call__(self, point: ChoicePoint) -> int:
        k = len(self.taken)
        if k >= len(self.values):
            raise ExplorationContractError(f"resolution missing for {point}")
        value = self.values[k]
        if value not in point.options:
            raise ExplorationContractError(f"{value} is not an option of {point}")
        self.taken.append((point, value))
        return value


def advance(ns: NetworkState, t: Topology, cfg: ProtocolConfig, choose: Chooser, *, record: bool = True):
    """One slot for the whole network: ``(next_state, outcome, events)``."""
    parity = ns.parity
    subs = [emit(s, parity, cfg) for s in ns.nodes]
    if record:
        outcome = mac.step_slot(t, subs, cfg)
        heard = outcome.delivered
    else:
        outcome = None
        _, got = mac.resolve(t, subs, cfg)
        heard = got
    nodes = []
    events: list[StepEvent] = []
    for s in ns.nodes:
        m = heard[s.id]
        sig = None if m.is_empty else classify(t, m.src, s.id)
        new, ev = deliver(s, m, sig, parity, cfg, choose, record=record)
        nodes.append(new)
        if record:
            events.extend(ev)
    return NetworkState(tuple(nodes), 1 - parity), outcome, events


def network_step(ns: NetworkState, t: Topology, cfg: ProtocolConfig, resolutions=()):
    """Advance one slot; ``resolutions`` is a chooser or a sequence of option values."""
    choose = resolutions if callable(resolutions) else SequenceChooser(resolutions)
    return advance(ns, t, cfg, choose)


def increase_count(ns: NetworkState) -> int:
    return ns.joined_count() - 1
