"""Scenario files: TOML documents describing a topology, a configuration and one analysis.

Grammar (keys not listed are rejected)::

    name = "narrow_bridge"              # required
    description = "..."                 # optional
    initial_channels = [1, 1]           # channels of nodes 2..n, or "sweep"

    [topology]                          # either explicit pairs ...
    nodes = 3
    close = [[1, 2]]
    range = [[2, 3]]
    # ... or a generator: generator = "balanced_binary_tree", h = 3

    [config]                            # any ProtocolConfig field except max_id
    variant = "with-acks"
    num_channels = 3

    [analysis]
    kind = "verify"                     # verify | witness | simulate | bound
    depth = 64                          # verify / witness
    seeds = [1, 2, 3]                   # simulate
    slot_bound = 5000                   # simulate
    h = [1, 3, 8]                       # bound
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .topology import Topology, TopologyError, balanced_binary_tree
from .types import CollisionScope, ProtocolConfig, Variant

ANALYSES = ("verify", "witness", "simulate", "bound")


class ScenarioError(ValueError):
    """Semantically invalid scenario."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"syntax error{where}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Analysis:
    kind: str
    depth: int = 64
    seeds: tuple[int, ...] = (1,)
    slot_bound: int = 5000
    h: tuple[int, ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: Topology
    config: ProtocolConfig
    initial_channels: tuple[int, ...] | None  # full vector incl. root; None means sweep
    analysis: Analysis
    description: str = ""
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def sweep(self) -> bool:
        return self.initial_channels is None


def _pairs(raw, key: str) -> list[tuple[int, int]]:
    if not isinstance(raw, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(x, int) for x in p) for p in raw
    ):
        raise ScenarioError(f"topology.{key} must be a list of [a, b] integer pairs")
    return [tuple(p) for p in raw]


def _topology(raw: dict) -> Topology:
    allowed = {"nodes", "close", "range", "generator", "h"}
    if extra := set(raw) - allowed:
        raise ScenarioError(f"unknown topology keys: {sorted(extra)}")
    if "generator" in raw:
        if raw["generator"] != "balanced_binary_tree":
            raise ScenarioError(f"unknown topology generator {raw['generator']!r}")
        h = raw.get("h")
        if not isinstance(h, int) or h < 0:
            raise ScenarioError("balanced_binary_tree needs a non-negative integer h")
        return balanced_binary_tree(h)
    n = raw.get("nodes")
    if not isinstance(n, int) or n < 1:
        raise ScenarioError("topology.nodes must be a positive integer")
    try:
        return Topology.from_pairs(n, close=_pairs(raw.get("close", []), "close"), range=_pairs(raw.get("range", []), "range"))
    except TopologyError as exc:
        raise ScenarioError(f"topology invariant violated: {exc}") from exc


_ENUM_FIELDS = {"variant": Variant, "collision_scope": CollisionScope}


def _config(raw: dict, n: int) -> ProtocolConfig:
    names = {f.name for f in fields(ProtocolConfig)} - {"max_id"}
    if extra := set(raw) - names:
        raise ScenarioError(f"unknown config keys: {sorted(extra)}")
    values = {}
    for key, value in raw.items():
        if key in _ENUM_FIELDS:
            try:
                value = _ENUM_FIELDS[key](value)
            except ValueError:
                choices = ", ".join(v.value for v in _ENUM_FIELDS[key])
                raise ScenarioError(f"config.{key} must be one of {choices}") from None
        values[key] = value
    try:
        return ProtocolConfig(max_id=n, **values)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid config: {exc}") from exc


def _analysis(raw: dict) -> Analysis:
    allowed = {"kind", "depth", "seeds", "slot_bound", "h"}
    if extra := set(raw) - allowed:
        raise ScenarioError(f"unknown analysis keys: {sorted(extra)}")
    kind = raw.get("kind")
    if kind not in ANALYSES:
        raise ScenarioError(f"analysis.kind must be exactly one of {', '.join(ANALYSES)}")
    a = Analysis(kind)
    for key in ("depth", "slot_bound"):
        if key in raw:
            if not isinstance(raw[key], int) or raw[key] < 1:
                raise ScenarioError(f"analysis.{key} must be a positive integer")
            a = replace(a, **{key: raw[key]})
    for key in ("seeds", "h"):
        if key in raw:
            if not isinstance(raw[key], list) or not all(isinstance(x, int) and x >= 0 for x in raw[key]):
                raise ScenarioError(f"analysis.{key} must be a list of non-negative integers")
            a = replace(a, **{key: tuple(raw[key])})
    return a


def from_dict(doc: dict) -> Scenario:
    allowed = {"name", "description", "initial_channels", "topology", "config", "analysis"}
    if extra := set(doc) - allowed:
        raise ScenarioError(f"unknown top-level keys: {sorted(extra)}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("name is required")
    for section in ("topology", "analysis"):
        if not isinstance(doc.get(section), dict):
            raise ScenarioError(f"[{section}] table is required")
    t = _topology(doc["topology"])
    cfg = _config(doc.get("config", {}), t.n)
    raw = doc.get("initial_channels", [1] * (t.n - 1))
    if raw == "sweep":
        init = None
    else:
        if not isinstance(raw, list) or not all(isinstance(c, int) for c in raw):
            raise ScenarioError('initial_channels must be a list of channels or "sweep"')
        if len(raw) != t.n - 1:
            raise ScenarioError(f"initial_channels needs {t.n - 1} entries (nodes 2..{t.n}), got {len(raw)}")
        for c in raw:
            if not 1 <= c <= cfg.num_channels:
                raise ScenarioError(f"channel {c} outside 1..{cfg.num_channels}")
        init = (1, *raw)
    return Scenario(name, t, cfg, init, _analysis(doc["analysis"]), doc.get("description", ""), doc)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        found = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(found[1]), int(found[2])) if found else (None, None)
        raise ScenarioSyntaxError(str(exc).split(" (at")[0], line, col) from exc
    return from_dict(doc)


def builtin_names() -> list[str]:
    files = resources.files("clustertree").joinpath("scenarios")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".toml"))


def builtin_text(name: str) -> str:
    path = resources.files("clustertree").joinpath("scenarios").joinpath(f"{name}.toml")
    if not path.is_file():
        raise ScenarioError(f"no built-in scenario named {name!r}")
    return path.read_text()


def load(ref: str) -> Scenario:
    """A built-in scenario by name, or a scenario file by path."""
    if ref in builtin_names():
        return parse_scenario(builtin_text(ref))
    try:
        with open(ref, encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    except FileNotFoundError:
        raise ScenarioError(f"{ref!r} is neither a built-in scenario nor a readable file") from None
