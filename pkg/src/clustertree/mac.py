"""Synchronous TSCH dedicated-slot engine.

Every node submits exactly one message per slot (listeners submit EMPTY to
announce their channel). Per channel, a single transmitter gets through and
two or more destroy each other. Each listener then observes the surviving
frame on its own channel, provided the sender is within radio reach.
"""

from __future__ import annotations

import functools
import os
from array import array
from dataclasses import dataclass

from .topology import Topology
from .types import Message, MessageType, ProtocolConfig, CollisionScope, silence

if os.environ.get("CLUSTERTREE_PURE"):
    from . import _slot_py as _kernel
else:
    try:
        from . import _slot as _kernel
    except ImportError:  # extension not built
        from . import _slot_py as _kernel

KERNEL = "compiled" if _kernel.__name__.endswith("._slot") else "python"

Traffic = tuple[Message, ...]


class ContractError(ValueError):
    """Submissions violate the one-message-per-node contract."""


@dataclass(frozen=True)
class SlotOutcome:
    sent: Traffic
    on_air: Traffic
    delivered: dict[int, Message]


def find_id(i: int, tr) -> Message:
    for m in tr:
        if m.src == i:
            return m
    raise LookupError(f"no message from node {i}")


def find_channel(c: int, tr) -> list[Message]:
    return [m for m in tr if m.channel == c]


def remove_collision(tr, num_channels: int) -> list[Message]:
    """One entry per channel: the lone frame on it, or silence."""
    out = []
    for c in range(1, num_channels + 1):
        on_c = [m for m in tr if m.channel == c and not m.is_empty]
        out.append(on_c[0] if len(on_c) == 1 else silence(c))
    return out


@functools.lru_cache(maxsize=64)
def reach_matrix(t: Topology) -> bytes:
    width = t.n + 1
    buf = bytearray(width * width)
    for a, b in t.close | t.range:
        buf[a * width + b] = 1
        buf[b * width + a] = 1
    return bytes(buf)


@functools.lru_cache(maxsize=None)
def silence_frame(c: int) -> Message:
    """Shared silence message for channel c."""
    return silence(c)


def kernel():
    """The active slot kernel module (compiled or pure Python)."""
    return _kernel


def _check(t: Topology, submissions, cfg: ProtocolConfig) -> None:
    if len(submissions) != t.n:
        raise ContractError(f"expected {t.n} submissions, got {len(submissions)}")
    for i, m in enumerate(submissions, start=1):
        if m.src != i:
            raise ContractError(f"submission {i} comes from node {m.src}")
        if not 1 <= m.channel <= cfg.num_channels:
            raise ContractError(f"node {i} submitted on channel {m.channel}")


def resolve(t: Topology, submissions, cfg: ProtocolConfig) -> tuple[list[Message], list[Message]]:
    """Fast path: ``(on_air, heard)`` lists, ``heard`` indexed by node id (slot 0 unused)."""
    n = t.n
    chans = array("i", [0] * (n + 1))
    tx = array("i", [0] * (n + 1))
    for i, m in enumerate(submissions, start=1):
        chans[i] = m.channel
        if m.mtype != MessageType.EMPTY:
            tx[i] = 1
    per_receiver = cfg.collision_scope is CollisionScope.PER_RECEIVER
    air, heard = _kernel.resolve(chans, tx, cfg.num_channels, reach_matrix(t), per_receiver)
    on_air = [submissions[air[c] - 1] if air[c] else silence_frame(c) for c in range(1, cfg.num_channels + 1)]
    got = [None]
    for i in range(1, n + 1):
        s = heard[i]
        got.append(submissions[s - 1] if s else silence_frame(chans[i]))
    return on_air, got


def step_slot(t: Topology, submissions, cfg: ProtocolConfig) -> SlotOutcome:
    submissions = tuple(submissions)
    _check(t, submissions, cfg)
    on_air, heard = resolve(t, submissions, cfg)
    return SlotOutcome(
        sent=submissions,
        on_air=tuple(on_air),
        delivered={i: heard[i] for i in range(1, t.n + 1)},
    )
