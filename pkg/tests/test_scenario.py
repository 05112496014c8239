import textwrap

import pytest

from clustertree.scenario import (
    ScenarioError,
    ScenarioSyntaxError,
    builtin_names,
    from_dict,
    load,
    parse_scenario,
)
from clustertree.types import CollisionScope, Variant

BASE = {
    "name": "demo",
    "topology": {"nodes": 3, "close": [[1, 2]], "range": [[2, 3]]},
    "analysis": {"kind": "verify"},
}


def with_(**parts):
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    for key, value in parts.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


def test_builtins_load():
    names = builtin_names()
    assert {"ack_collision", "associate_collision", "narrow_bridge", "fig2a_three_nodes", "binary_tree_h3"} <= set(names)
    for name in names:
        sc = load(name)
        assert sc.name == name
        assert sc.config.max_id == sc.topology.n


def test_defaults():
    sc = from_dict(BASE)
    assert sc.initial_channels == (1, 1, 1)
    assert sc.config.variant is Variant.WITH_ACKS
    assert sc.analysis.depth == 64 and not sc.sweep


def test_sweep_and_generator():
    sc = from_dict(with_(initial_channels="sweep", topology={"generator": "balanced_binary_tree", "h": 2}))
    assert sc.sweep and sc.topology.n == 7 and sc.config.max_id == 7


def test_config_enums():
    sc = from_dict(with_(config={"variant": "no-acks", "collision_scope": "per-receiver", "num_channels": 2}))
    assert sc.config.variant is Variant.NO_ACKS
    assert sc.config.collision_scope is CollisionScope.PER_RECEIVER


def test_syntax_error_has_position():
    text = 'name = "x"\n[topology]\nnodes = = 3\n'
    with pytest.raises(ScenarioSyntaxError) as info:
        parse_scenario(text)
    assert info.value.line == 3 and info.value.column is not None
    assert "line 3" in str(info.value)


def test_overlapping_relations_rejected():
    doc = with_(topology={"close": [[1, 2]], "range": [[2, 1]]})
    with pytest.raises(ScenarioError, match="both close and in range"):
        from_dict(doc)


def test_unknown_node_rejected():
    with pytest.raises(ScenarioError, match="outside"):
        from_dict(with_(topology={"range": [[2, 9]]}))


@pytest.mark.parametrize(
    "doc,match",
    [
        (with_(extra=1), "unknown top-level"),
        (with_(config={"max_id": 4}), "unknown config"),
        (with_(config={"variant": "sometimes"}), "must be one of"),
        (with_(analysis={"kind": "explain"}), "exactly one of"),
        (with_(analysis={"depth": 0}), "positive"),
        (with_(initial_channels=[1]), "needs 2 entries"),
        (with_(initial_channels=[1, 4]), "outside"),
        (with_(initial_channels="all"), "sweep"),
        (with_(topology={"generator": "ring"}), "generator"),
        ({"topology": BASE["topology"], "analysis": BASE["analysis"]}, "name"),
        (with_(analysis=None), r"\[analysis\]"),
    ],
)
def test_semantic_errors(doc, match):
    with pytest.raises(ScenarioError, match=match):
        from_dict(doc)


def test_load_from_path(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(
        textwrap.dedent(
            """
            name = "mine"
            initial_channels = [2, 3]
            [topology]
            nodes = 3
            range = [[1, 2], [1, 3]]
            [analysis]
            kind = "witness"
            depth = 20
            """
        )
    )
    sc = load(str(path))
    assert sc.initial_channels == (1, 2, 3) and sc.analysis.kind == "witness"


def test_missing_reference():
    with pytest.raises(ScenarioError, match="neither"):
        load("definitely_not_here")
