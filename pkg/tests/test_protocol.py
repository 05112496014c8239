import pytest

from clustertree.explorer import explore
from clustertree.invariants import edge_violations, graph_violations, state_violations
from clustertree.protocol import (
    ChoiceKind,
    ChoicePoint,
    ExplorationContractError,
    Increase,
    NetworkState,
    Phase,
    SequenceChooser,
    emit,
    increase_count,
    initial_state,
    network_step,
    node_init,
    preferred_channel,
    replace,
)
from clustertree.topology import Topology, balanced_binary_tree
from clustertree.types import MessageType, ProtocolConfig, Role, Variant

THREE_NODE = balanced_binary_tree(1)
NO_ACKS = ProtocolConfig(variant=Variant.NO_ACKS)
BRIDGE = Topology.from_pairs(3, close=[(1, 2)], range=[(2, 3)])


def test_initial_state():
    ns = initial_state([1, 2, 3], NO_ACKS)
    root, a, b = ns.nodes
    assert root.role is Role.CLUSTER_HEAD and root.tier == 0 and root.ac == 1
    assert (a.role, a.ch, b.ch) == (Role.FREE, 2, 3)
    assert ns.parity == 0 and not ns.goal and increase_count(ns) == 0
    with pytest.raises(ValueError):
        initial_state([1, 1], NO_ACKS)
    with pytest.raises(ValueError):
        node_init(2, 4, NO_ACKS)


def test_root_beacons_on_even_parity_only():
    root = node_init(1, 1, NO_ACKS)
    assert emit(root, 0, NO_ACKS).mtype is MessageType.BEACON
    assert emit(root, 1, NO_ACKS).is_empty
    assert emit(node_init(2, 2, NO_ACKS), 0, NO_ACKS).is_empty


def test_fast_replace_matches_constructor():
    s = node_init(2, 1, NO_ACKS)
    t = replace(s, ch=3, phase=Phase.SCANNING)
    assert (t.id, t.ch, t.phase, t.role) == (2, 3, Phase.SCANNING, Role.FREE)
    assert t == type(s)(2, Role.FREE, 3, Phase.SCANNING)
    assert hash(t) == hash(type(s)(2, Role.FREE, 3, Phase.SCANNING))


def test_preferred_channel_policy():
    root = node_init(1, 1, NO_ACKS)
    assert preferred_channel(root, NO_ACKS) == 2
    root = replace(root, assigned=((2, 2),))
    assert preferred_channel(root, NO_ACKS) == 3
    root = replace(root, assigned=((2, 2), (3, 3)))
    assert preferred_channel(root, NO_ACKS) == 1
    assert preferred_channel(root, NO_ACKS, avoid=1) == 2


def test_sequence_chooser_contract():
    point = ChoicePoint(2, ChoiceKind.RANDOM_WAIT, (1, 2, 3))
    ch = SequenceChooser([2])
    assert ch(point) == 2
    with pytest.raises(ExplorationContractError):
        ch(point)
    with pytest.raises(ExplorationContractError):
        SequenceChooser([9])(point)


def test_eight_slot_formation_smoke():
    ns = initial_state([1, 1, 1], NO_ACKS)
    g = explore(THREE_NODE, (1, 1, 1), NO_ACKS)
    from clustertree.explorer import shortest_witness

    increases = 0
    for e in shortest_witness(g):
        ns, outcome, events = network_step(ns, THREE_NODE, NO_ACKS, [v for _, _, v in e.resolutions])
        increases += sum(isinstance(x, Increase) for x in events)
        assert not any(m.mtype in (MessageType.BEACON_ACK, MessageType.ACK_RESPONSE) for m in outcome.sent)
    assert ns.goal and increases == 2 == increase_count(ns)
    assert {s.pid for s in ns.nodes[1:]} == {1}


@pytest.mark.parametrize(
    "t,cfg",
    [(THREE_NODE, NO_ACKS), (THREE_NODE, ProtocolConfig()), (BRIDGE, ProtocolConfig()), (BRIDGE, NO_ACKS)],
)
@pytest.mark.parametrize("init", [(1, 1, 1), (1, 2, 3), (1, 3, 2)])
def test_no_invariant_violations(t, cfg, init):
    g = explore(t, init, cfg, depth_bound=64)
    assert graph_violations(g) == []


def test_tier_violation_detected():
    ns = initial_state([1, 1, 1], NO_ACKS)
    bad = replace(ns.node(2), role=Role.CLUSTER_SLAVE, pid=1, tier=3)
    found = state_violations(NetworkState((ns.node(1), bad, ns.node(3))))
    assert [v.invariant for v in found] == ["tier"]


def test_duality_violation_detected():
    ns = initial_state([1, 1, 1], NO_ACKS)
    root = replace(ns.node(1), children=((2, 2),))
    found = state_violations(NetworkState((root, ns.node(2), ns.node(3))))
    assert [v.invariant for v in found] == ["duality"]


def test_orphan_member_detected():
    ns = initial_state([1, 1, 1], NO_ACKS)
    bad = replace(ns.node(3), role=Role.CLUSTER_HEAD, tier=1)
    found = state_violations(NetworkState((ns.node(1), ns.node(2), bad)))
    assert "tree-shape" in {v.invariant for v in found}


def test_edge_violations_detected():
    ns = initial_state([1, 1, 1], NO_ACKS)
    joined = replace(ns.node(2), role=Role.CLUSTER_SLAVE, pid=1, tier=1)
    after = NetworkState((ns.node(1), joined, ns.node(3)), 1)
    names = {v.invariant for v in edge_violations(ns, after, None, (), NO_ACKS)}
    assert names == {"increase-identity"}
    names = {v.invariant for v in edge_violations(after, ns, None, (), NO_ACKS)}
    assert {"role-monotonicity", "increase-monotonicity"} <= names


def test_confinement_and_parity_detected():
    ns = initial_state([1, 2, 3], NO_ACKS)
    _, outcome, events = network_step(ns, THREE_NODE, NO_ACKS)
    odd = NetworkState(ns.nodes, 1)
    names = {v.invariant for v in edge_violations(odd, odd, outcome, events, NO_ACKS)}
    assert "parity" in names
    with_acks = ProtocolConfig()
    g = explore(THREE_NODE, (1, 1, 1), with_acks, depth_bound=8)
    acks = [e for e in g.all_edges() if any(m.mtype is MessageType.BEACON_ACK for m in e.outcome.sent)]
    assert acks
    e = acks[0]
    names = {v.invariant for v in edge_violations(g.states[e.src], g.states[e.dst], e.outcome, e.events, NO_ACKS)}
    assert names == {"confinement"}
