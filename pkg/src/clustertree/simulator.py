"""Seeded randomized runs for networks too large to explore.

Only random back-off draws consume randomness. Scanning visits channels in
ascending order and the root hands out channels by
:func:`~clustertree.protocol.preferred_channel`.

Randomness comes from SplitMix64, fully specified by its recurrence::

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output z ^ (z >> 31)

with the initial state equal to the seed. A draw from ``1..k`` is
``output mod k + 1``.
"""

from __future__ import annotations

import csv
import gc
import io
import statistics
from dataclasses import dataclass

from . import mac
from .protocol import (
    ChoiceKind,
    ChoicePoint,
    NetworkState,
    advance,
    deliver,
    emit,
    initial_state,
    preferred_channel,
)
from .scalability import to_time
from .topology import Topology, classify
from .trace import RecordingChooser, format_slot
from .types import ROOT, CollisionScope, ProtocolConfig

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def draw(self, k: int) -> int:
        return self.next() % k + 1


@dataclass(frozen=True)
class RunResult:
    formed: bool
    slots_used: int
    slotframes: int
    milliseconds: int
    seed: int
    trace: tuple[str, ...] | None = None

    def row(self) -> list:
        return [self.seed, int(self.formed), self.slots_used, self.slotframes, self.milliseconds]


class _Chooser:
    def __init__(self, rng: SplitMix64, cfg: ProtocolConfig, forced: dict | None):
        self.rng = rng
        self.cfg = cfg
        self.forced = forced or {}
        self.state: NetworkState | None = None

    def __call__(self, point: ChoicePoint) -> int:
        key = (point.node, point.kind)
        if key in self.forced and self.forced[key]:
            value = self.forced[key].pop(0)
            if value in point.options:
                return value
        if point.kind is ChoiceKind.RANDOM_WAIT:
            return point.options[self.rng.draw(len(point.options)) - 1]
        if point.kind is ChoiceKind.CHANNEL_ASSIGNMENT:
            return preferred_channel(self.state.node(ROOT), self.cfg, point.via)
        return point.options[0]


class FastStepper:
    """Equivalent of ``advance(..., record=False)`` with memoized transitions.

    Node states are interned so that transitions that raised no choice
    point can be cached by object identity. Heard messages are either cached
    emissions or cached silence frames, so their identities are stable too.
    """

    def __init__(self, t: Topology, cfg: ProtocolConfig):
        self.t = t
        self.cfg = cfg
        self._intern: dict = {}
        self._table: dict = {}
        self._silences = [None] + [mac.silence_frame(c) for c in cfg.channels]

    def canon(self, ns: NetworkState) -> NetworkState:
        intern = self._intern
        return NetworkState(tuple(intern.setdefault(s, s) for s in ns.nodes), ns.parity)

    def step(self, ns: NetworkState, choose) -> NetworkState:
        cfg = self.cfg
        t = self.t
        intern = self._intern
        used = False

        def tracked(point):
            nonlocal used
            used = True
            return choose(point)

        def emit_miss(s, parity):
            m = emit(s, parity, cfg)
            return m, m.channel, 0 if m.is_empty else 1

        def deliver_miss(s, m, parity):
            nonlocal used
            used = False
            sig = None if m.is_empty else classify(t, m.src, s.id)
            new, _ = deliver(s, m, sig, parity, cfg, tracked, record=False)
            return intern.setdefault(new, new), not used

        nodes = mac.kernel().step_cached(
            ns.nodes, ns.parity, self._table, emit_miss, deliver_miss,
            cfg.num_channels, mac.reach_matrix(t),
            cfg.collision_scope is CollisionScope.PER_RECEIVER, self._silences,
        )
        return NetworkState(tuple(nodes), 1 - ns.parity)


def run(
    t: Topology,
    init_channels,
    cfg: ProtocolConfig,
    seed: int,
    slot_bound: int,
    *,
    trace: bool = False,
    forced: dict[tuple[int, ChoiceKind], list[int]] | None = None,
) -> RunResult:
    """Step the network until every node has joined or ``slot_bound`` slots pass.

    ``forced`` pins the first resolutions of given ``(node, kind)`` choice
    points; anything not pinned falls back to the seeded policy.
    """
    if slot_bound < 1:
        raise ValueError("slot_bound must be at least 1")
    chooser = _Chooser(SplitMix64(seed), cfg, {k: list(v) for k, v in (forced or {}).items()})
    ns = initial_state(list(init_channels), cfg)
    lines: list[str] | None = [] if trace else None
    fast = None if trace else FastStepper(t, cfg)
    if fast is not None:
        ns = fast.canon(ns)
    slots = 0
    # the caches hold no cycles; stop the collector from rescanning them
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        while not ns.goal and slots < slot_bound:
            chooser.state = ns
            if fast is not None:
                ns = fast.step(ns, chooser)
            else:
                rec = RecordingChooser(chooser)
                parity = ns.parity
                ns, outcome, events = advance(ns, t, cfg, rec)
                lines.append(format_slot(slots + 1, parity, rec.taken, outcome, events))
            slots += 1
    finally:
        if was_enabled:
            gc.enable()
    frames, ms = to_time(slots, cfg)
    return RunResult(ns.goal, slots, frames, ms, seed, tuple(lines) if lines is not None else None)


@dataclass(frozen=True)
class BatchSummary:
    runs: tuple[RunResult, ...]

    @property
    def formation_rate(self) -> float:
        return sum(r.formed for r in self.runs) / len(self.runs)

    def _formed_slots(self) -> list[int]:
        return sorted(r.slots_used for r in self.runs if r.formed)

    @property
    def min_slots(self) -> int | None:
        s = self._formed_slots()
        return s[0] if s else None

    @property
    def median_slots(self) -> float | None:
        s = self._formed_slots()
        return statistics.median(s) if s else None

    @property
    def max_slots(self) -> int | None:
        s = self._formed_slots()
        return s[-1] if s else None

    def describe(self) -> str:
        return (
            f"runs={len(self.runs)} formed={sum(r.formed for r in self.runs)} "
            f"rate={self.formation_rate:.3f} min={self.min_slots} "
            f"median={self.median_slots} max={self.max_slots}"
        )


def batch(t: Topology, cfg: ProtocolConfig, seeds, slot_bound: int, init_channels=None) -> BatchSummary:
    """Independent runs, one per seed; nodes start on channel 1 unless told otherwise."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    chans = list(init_channels) if init_channels is not None else [1] * t.n
    return BatchSummary(tuple(run(t, chans, cfg, s, slot_bound) for s in seeds))


def to_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "formed", "slots", "slotframes", "milliseconds"])
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()
