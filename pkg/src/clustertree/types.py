"""Shared vocabulary: identifiers, message kinds, roles and protocol configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass

NO_NODE = 0
NO_CHANNEL = 0
ROOT = 1


class SchemaError(ValueError):
    """A message payload does not match its type's layout."""


class MessageType(enum.IntEnum):
    EMPTY = 0
    BEACON = 1
    BEACON_ACK = 2
    ACK_RESPONSE = 3
    ASSOCIATE = 4
    ASSOCIATE_ACK = 5

    @property
    def short(self) -> str:
        return _SHORT[self]


_SHORT = {
    MessageType.EMPTY: "-",
    MessageType.BEACON: "B",
    MessageType.BEACON_ACK: "BA",
    MessageType.ACK_RESPONSE: "AR",
    MessageType.ASSOCIATE: "A",
    MessageType.ASSOCIATE_ACK: "AA",
}


class Role(enum.IntEnum):
    CLUSTER_HEAD = 0
    TENTATIVE = 1
    CLUSTER_SLAVE = 2
    FREE = 3

    @property
    def short(self) -> str:
        return ("CH", "T", "CS", "F")[self]


# Codes carried in the first ASSOCIATE payload slot.
ASSOC_SLAVE = 0
ASSOC_HEAD = 1

ROLE_EDGES = frozenset(
    {
        (Role.FREE, Role.TENTATIVE),
        (Role.FREE, Role.CLUSTER_SLAVE),
        (Role.TENTATIVE, Role.CLUSTER_SLAVE),
        (Role.TENTATIVE, Role.CLUSTER_HEAD),
    }
)


def role_transition_allowed(old: Role, new: Role) -> bool:
    return old == new or (old, new) in ROLE_EDGES


# Fixed arities; ASSOCIATE_ACK is a non-empty sequence of (channel, target) pairs.
_ARITY = {
    MessageType.EMPTY: 0,
    MessageType.BEACON: 1,
    MessageType.BEACON_ACK: 1,
    MessageType.ACK_RESPONSE: 2,
    MessageType.ASSOCIATE: 4,
}


def payload_of(mtype: MessageType, args) -> tuple[int, ...]:
    """Canonical payload for ``mtype`` built from ``args``.

    BEACON carries ``[tier]``, BEACON_ACK ``[head]``, ACK_RESPONSE
    ``[wait_time, target]``, ASSOCIATE ``[role_code, requester, head, via]`` (``via`` is the
    channel of the requester's own parent) and
    ASSOCIATE_ACK one or more ``[channel, target]`` pairs.
    """
    args = tuple(int(a) for a in args)
    if any(a < 0 for a in args):
        raise SchemaError(f"{mtype.name} payload must hold naturals, got {args}")
    if mtype == MessageType.ASSOCIATE_ACK:
        if not args or len(args) % 2:
            raise SchemaError(f"ASSOCIATE_ACK needs (channel, target) pairs, got {args}")
        return args
    want = _ARITY[mtype]
    if len(args) != want:
        raise SchemaError(f"{mtype.name} takes {want} payload values, got {len(args)}")
    if mtype == MessageType.ASSOCIATE and args[0] not in (ASSOC_SLAVE, ASSOC_HEAD):
        raise SchemaError(f"unknown association role code {args[0]}")
    return args


@dataclass(frozen=True, slots=True)
class Message:
    src: int
    channel: int
    mtype: MessageType = MessageType.EMPTY
    payload: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "payload", payload_of(self.mtype, self.payload))

    @property
    def is_empty(self) -> bool:
        return self.mtype == MessageType.EMPTY

    def grants(self) -> tuple[tuple[int, int], ...]:
        """(channel, target) pairs of an ASSOCIATE_ACK."""
        p = self.payload
        return tuple((p[k], p[k + 1]) for k in range(0, len(p), 2))

    def __str__(self) -> str:
        if self.is_empty:
            return f"{self.channel}:-"
        body = ",".join(map(str, self.payload))
        return f"{self.channel}:{self.mtype.short}<{self.src}>({body})"


def silence(channel: int) -> Message:
    return Message(NO_NODE, channel, MessageType.EMPTY, ())


class Variant(enum.Enum):
    WITH_ACKS = "with-acks"
    NO_ACKS = "no-acks"


class CollisionScope(enum.Enum):
    GLOBAL = "global"
    PER_RECEIVER = "per-receiver"


@dataclass(frozen=True)
class ProtocolConfig:
    max_id: int = 3
    num_channels: int = 3
    variant: Variant = Variant.WITH_ACKS
    min_tentative_slots: int = 2
    scan_dwell_slots: int = 2
    max_random_wait: int = 3
    collision_scope: CollisionScope = CollisionScope.GLOBAL
    slot_ms: int = 120
    slots_per_frame: int = 12
    reserved_per_frame: int = 2
    # wait_time a head puts into ACK_RESPONSE; None means min_tentative_slots
    ack_wait_time: int | None = None
    # free nodes move to the next channel after every odd reserved slot
    free_hop: bool = True

    def __post_init__(self):
        if self.max_id < 1:
            raise ValueError("max_id must be at least 1")
        if self.num_channels < 1:
            raise ValueError("num_channels must be at least 1")
        if self.min_tentative_slots < 1 or self.scan_dwell_slots < 1:
            raise ValueError("tentative and dwell times must be positive")
        if self.max_random_wait < 1:
            raise ValueError("max_random_wait must be positive")
        if not 1 <= self.reserved_per_frame <= self.slots_per_frame:
            raise ValueError("reserved_per_frame must fit in the slotframe")

    @property
    def wait_time(self) -> int:
        return self.min_tentative_slots if self.ack_wait_time is None else self.ack_wait_time

    @property
    def no_acks(self) -> bool:
        return self.variant is Variant.NO_ACKS

    @property
    def channels(self) -> range:
        return range(1, self.num_channels + 1)
