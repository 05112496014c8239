"""Line-oriented slot traces.

A trace starts with ``#`` header lines, one of which is ``# setup {json}``
holding the topology, configuration and initial channels. Each further line
describes one slot::

    slot=3 parity=0 res=2:random-wait:1 air=1:B<1>(0) 2:- 3:- heard=1:- 2:1:B<1>(0) 3:- | events...

``res`` lists choice resolutions in the order they were requested (``-`` when
none), ``air`` the surviving frame per channel, ``heard`` what each node
received, and everything after ``|`` the step's events.
"""

from __future__ import annotations

import json
from dataclasses import fields

from .protocol import ChoiceKind, MessageDelivered, NetworkState, initial_state, network_step
from .topology import Topology
from .types import CollisionScope, ProtocolConfig, Variant

Resolution = tuple[int, str, int]


def setup_header(t: Topology, cfg: ProtocolConfig, init_channels) -> str:
    conf = {f.name: getattr(cfg, f.name) for f in fields(ProtocolConfig)}
    conf["variant"] = cfg.variant.value
    conf["collision_scope"] = cfg.collision_scope.value
    doc = {
        "nodes": t.n,
        "close": sorted(map(list, t.close)),
        "range": sorted(map(list, t.range)),
        "config": conf,
        "init": list(init_channels),
    }
    return "# setup " + json.dumps(doc, sort_keys=True, separators=(",", ":"))


def parse_setup(line: str) -> tuple[Topology, ProtocolConfig, list[int]]:
    doc = json.loads(line[len("# setup "):])
    conf = dict(doc["config"])
    conf["variant"] = Variant(conf["variant"])
    conf["collision_scope"] = CollisionScope(conf["collision_scope"])
    t = Topology.from_pairs(doc["nodes"], close=map(tuple, doc["close"]), range=map(tuple, doc["range"]))
    return t, ProtocolConfig(**conf), doc["init"]


def format_resolutions(res) -> str:
    return ",".join(f"{n}:{k}:{v}" for n, k, v in res) or "-"


def parse_resolutions(text: str) -> list[Resolution]:
    if text == "-":
        return []
    out = []
    for item in text.split(","):
        n, k, v = item.split(":")
        ChoiceKind(k)  # validates the kind
        out.append((int(n), k, int(v)))
    return out


def _heard(i: int, m) -> str:
    return f"{i}:-" if m.is_empty else f"{i}:{m}"


def format_slot(k: int, parity: int, res, outcome, events) -> str:
    air = " ".join(str(m) for m in outcome.on_air)
    heard = " ".join(_heard(i, m) for i, m in sorted(outcome.delivered.items()))
    ev = " ".join(str(e) for e in events if not isinstance(e, MessageDelivered))
    return f"slot={k} parity={parity} res={format_resolutions(res)} air={air} heard={heard} | {ev}".rstrip()


class RecordingChooser:
    """Wraps a chooser and keeps the resolutions it hands out."""

    def __init__(self, inner):
        self.inner = inner
        self.taken: list[Resolution] = []

    def __call__(self, point) -> int:
        value = self.inner(point)
        self.taken.append((point.node, point.kind.value, value))
        return value


def render_path(edges, states: list[NetworkState], start: int = 1, marks: dict | None = None) -> list[str]:
    """Trace lines for explorer edges; ``marks`` maps an edge index to a line printed before it."""
    lines = []
    for k, e in enumerate(edges):
        if marks and k in marks:
            lines.append(marks[k])
        lines.append(format_slot(start + k, states[e.src].parity, e.resolutions, e.outcome, e.events))
    return lines


class ReplayMismatch(AssertionError):
    pass


def replay(text: str) -> int:
    """Re-run a trace through ``network_step``; returns the number of slots checked."""
    setup = None
    slots = []
    for line in text.splitlines():
        if line.startswith("# setup "):
            setup = parse_setup(line)
        elif line.startswith("slot="):
            slots.append(line)
    if setup is None:
        raise ValueError("trace has no '# setup' header")
    t, cfg, init = setup
    ns = initial_state(init, cfg)
    for k, line in enumerate(slots, start=1):
        res_text = line.split(" res=", 1)[1].split(" ", 1)[0]
        res = parse_resolutions(res_text)
        parity = ns.parity
        ns, outcome, events = network_step(ns, t, cfg, [v for _, _, v in res])
        got = format_slot(int(line.split()[0][5:]), parity, res, outcome, events)
        if got != line:
            raise ReplayMismatch(f"slot {k} differs:\n  recorded: {line}\n  replayed: {got}")
    return len(slots)

