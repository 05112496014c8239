"""Closed-form formation-time bounds for balanced binary trees.

All slot counts are exact integers. Time conversions treat formation slots as
reserved slots and count whole slotframes: ``frames = ceil(slots / reserved)``
and ``ms = frames * slots_per_frame * slot_ms``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .types import ProtocolConfig

CONVENTION = "slots are reserved slots; elapsed time counts whole slotframes (ceil(slots/reserved) x slots_per_frame x slot_ms)"

# Published figures quoted verbatim next to the derived values.
REFERENCE_FIGURES = {
    "three_node_slotframes": "3 slotframes",
    "three_node_ms": "5760 ms",
    "h8_minutes": "27 minutes",
}

# Superlinearity holds when the ratio never drops below this share of its value at h_min.
SUPERLINEAR_FRACTION = 0.25


class DomainError(ValueError):
    pass


class Schedule(enum.Enum):
    SEQUENTIAL = "sequential"
    ROOT_PARALLEL = "root-parallel"


def association_latency(tier: int) -> int:
    """Slots a tier-``tier`` node needs to associate (request up, grant down)."""
    if tier < 1:
        raise DomainError("the root does not associate; tier must be at least 1")
    return 2 * tier


def per_level_time(i: int, schedule: Schedule = Schedule.ROOT_PARALLEL) -> int:
    """Slots to attach all 2**i nodes of level i."""
    if i < 1:
        raise DomainError("level must be at least 1")
    if schedule is Schedule.SEQUENTIAL:
        return 5 + 2 ** (i + 1) * i
    return 7 + 2**i * i


def lower_bound_slots(h: int) -> int:
    if h < 1:
        raise DomainError("height must be at least 1")
    return 5 + 2 * h + sum(per_level_time(i) for i in range(1, h))


def tree_nodes(h: int) -> int:
    return 2 ** (h + 1) - 1


def ratio(h: int) -> float:
    """Lower bound divided by n log2 n."""
    n = tree_nodes(h)
    return lower_bound_slots(h) / (n * math.log2(n))


def to_time(slots: int, cfg: ProtocolConfig) -> tuple[int, int]:
    frames = -(-slots // cfg.reserved_per_frame)
    return frames, frames * cfg.slots_per_frame * cfg.slot_ms


@dataclass(frozen=True)
class BoundReport:
    h: int
    nodes: int
    slots: int
    slotframes: int
    milliseconds: int
    ratio: float

    @property
    def minutes(self) -> float:
        return self.milliseconds / 60000


def report(h_values, cfg: ProtocolConfig | None = None) -> list[BoundReport]:
    cfg = cfg or ProtocolConfig()
    out = []
    for h in h_values:
        slots = lower_bound_slots(h)
        frames, ms = to_time(slots, cfg)
        out.append(BoundReport(h, tree_nodes(h), slots, frames, ms, ratio(h)))
    return out


def superlinearity_check(h_min: int, h_max: int) -> bool:
    """True when the ratio stays above a fixed positive floor over ``h_min..h_max``.

    The floor is ``SUPERLINEAR_FRACTION * ratio(h_min)``.
    """
    if h_min < 2 or h_max <= h_min:
        raise DomainError("need 2 <= h_min < h_max")
    floor = SUPERLINEAR_FRACTION * ratio(h_min)
    return floor > 0 and min(ratio(h) for h in range(h_min, h_max + 1)) >= floor


def format_table(reports, fmt: str = "text") -> str:
    cols = ("h", "nodes", "slots", "slotframes", "milliseconds", "minutes", "ratio")
    rows = [
        (r.h, r.nodes, r.slots, r.slotframes, r.milliseconds, f"{r.minutes:.2f}", f"{r.ratio:.6f}")
        for r in reports
    ]
    if fmt == "csv":
        return "\n".join(",".join(map(str, line)) for line in [cols, *rows]) + "\n"
    cells = [tuple(map(str, cols))] + [tuple(map(str, r)) for r in rows]
    widths = [max(len(c[k]) for c in cells) for k in range(len(cols))]
    lines = [f"# {CONVENTION}"]
    lines += ["  ".join(c[k].rjust(widths[k]) for k in range(len(cols))) for c in cells]
    return "\n".join(lines) + "\n"


def reference_notes(cfg: ProtocolConfig | None = None) -> str:
    """Derived conversions beside the published figures they differ from."""
    cfg = cfg or ProtocolConfig()
    frames3, ms3 = to_time(8, cfg)
    frames8, ms8 = to_time(lower_bound_slots(8), cfg)
    return "\n".join(
        [
            f"3-node minimum: 8 slots -> {frames3} slotframes -> {ms3} ms",
            f"  published: \"{REFERENCE_FIGURES['three_node_slotframes']}\" and \"{REFERENCE_FIGURES['three_node_ms']}\""
            f" (note: {ms3} ms is {frames3} frames, not 3)",
            f"h=8 bound: {lower_bound_slots(8)} slots -> {frames8} slotframes -> {ms8} ms ({ms8 / 60000:.1f} min)",
            f"  published: \"{REFERENCE_FIGURES['h8_minutes']}\" (conversion not stated; not reproduced)",
        ]
    ) + "\n"
