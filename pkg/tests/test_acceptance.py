"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that is printed in the pytest summary
(and immediately, when run with ``-s``).
"""

import io
import itertools
import random
import subprocess
import sys
import time
from contextlib import redirect_stdout

import pytest

from clustertree import mac
from clustertree.cli import main
from clustertree.explorer import (
    FailureClass,
    channel_assignments,
    check_formation,
    explore,
    shortest_witness,
    sweep_initial_configs,
)
from clustertree.invariants import graph_violations
from clustertree.scalability import lower_bound_slots, superlinearity_check, to_time
from clustertree.scenario import load
from clustertree.simulator import run
from clustertree.topology import Topology, balanced_binary_tree, enumerate_well_connected
from clustertree.types import CollisionScope, Message, MessageType, ProtocolConfig, Variant

from conftest import ACCEPTANCE
from oracles import bound_slots, engine_oracle

SWEEP_DEPTH = 64


def record(k, ok, detail):
    ACCEPTANCE[k] = (ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def graphs():
    """Explored graphs from criteria 1-3, collected for the invariant check."""
    return []


def test_criterion_1_failure_reproduction(graphs):
    expected = {
        "ack_collision": FailureClass.ACK_COLLISION,
        "associate_collision": FailureClass.ASSOCIATE_COLLISION,
        "narrow_bridge": FailureClass.NARROW_BRIDGE,
    }
    inevitable = {"ack_collision", "narrow_bridge"}
    notes, ok = [], True
    for name, cls in expected.items():
        sc = load(name)
        start = time.perf_counter()
        g = explore(sc.topology, sc.initial_channels, sc.config, sc.analysis.depth)
        v = check_formation(g)
        elapsed = time.perf_counter() - start
        graphs.append(g)
        good = v.fails and v.failure_class is cls and elapsed <= 60
        if name in inevitable:
            # every branch fails: no goal state is reachable at all
            good = good and g.complete and not any(g.goal(k) for k in range(len(g.states)))
        ok &= good
        notes.append(f"{name}={v.failure_class.value if v.failure_class else v.kind}({elapsed:.1f}s)")
    record(1, ok, " ".join(notes))


def test_criterion_2_exhaustive_sweep(graphs):
    start = time.perf_counter()
    seen = {c: 0 for c in FailureClass}
    runs = inconclusive = holds = 0
    topologies = enumerate_well_connected(3)
    for t in topologies:
        for variant in Variant:
            cfg = ProtocolConfig(variant=variant)
            for init in channel_assignments(cfg):
                g = explore(t, init, cfg, SWEEP_DEPTH)
                v = check_formation(g)
                graphs.append(g)
                runs += 1
                if v.kind == "inconclusive":
                    inconclusive += 1
                elif v.holds:
                    holds += 1
                else:
                    seen[v.failure_class] += 1
    elapsed = time.perf_counter() - start
    named = (FailureClass.ACK_COLLISION, FailureClass.ASSOCIATE_COLLISION, FailureClass.NARROW_BRIDGE)
    ok = len(topologies) == 20 and inconclusive == 0 and all(seen[c] > 0 for c in named) and elapsed <= 600
    counts = " ".join(f"{c.value}={n}" for c, n in seen.items())
    record(2, ok, f"{runs} configs, holds={holds} {counts} inconclusive={inconclusive} ({elapsed:.1f}s)")


def test_criterion_3_minimal_witness(graphs):
    cfg = ProtocolConfig(variant=Variant.NO_ACKS, min_tentative_slots=2)
    t = balanced_binary_tree(1)
    result = sweep_initial_configs(t, cfg)
    for init in channel_assignments(cfg):
        graphs.append(explore(t, init, cfg))
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["witness", "fig2a_three_nodes"])
    out = buf.getvalue()
    frames, ms = to_time(8, cfg)
    ok = (
        result.min_witness == 8
        and code == 0
        and "minimum witness: 8 slots" in out
        and f"= {frames} slotframes = {ms} ms" in out
        and frames == 4
        and '"3 slotframes"' in out
        and '"5760 ms"' in out
    )
    record(3, ok, f"min witness={result.min_witness} at {result.best_config()}, {frames} slotframes, {ms} ms")


def test_criterion_4_formula_table():
    want = {1: 7, 3: 35, 8: 1608}
    got = {h: lower_bound_slots(h) for h in want}
    oracle = {h: bound_slots(h) for h in want}
    sup = superlinearity_check(2, 12)
    ok = got == want == oracle and sup
    record(4, ok, f"slots {got} oracle {oracle} superlinear(2,12)={sup}")


def test_criterion_5_bound_vs_model():
    start = time.perf_counter()
    cfg1 = ProtocolConfig(variant=Variant.NO_ACKS)
    t1 = balanced_binary_tree(1)
    witness = min(
        len(shortest_witness(g))
        for g in (explore(t1, init, cfg1) for init in channel_assignments(cfg1))
        if any(g.goal(k) for k in range(len(g.states)))
    )
    t2 = balanced_binary_tree(2)
    cfg2 = ProtocolConfig(max_id=t2.n, variant=Variant.NO_ACKS, collision_scope=CollisionScope.PER_RECEIVER)
    results = [run(t2, (1,) * t2.n, cfg2, seed, 5000) for seed in range(1, 101)]
    formed = [r.slots_used for r in results if r.formed]
    elapsed = time.perf_counter() - start
    bound2 = lower_bound_slots(2)
    ok = (
        witness >= lower_bound_slots(1)
        and len(formed) == len(results) >= 100
        and min(formed) >= bound2
        and elapsed <= 300
    )
    record(
        5,
        ok,
        f"h=1 witness {witness} >= {lower_bound_slots(1)}; h=2 {len(formed)}/{len(results)} formed, "
        f"min {min(formed) if formed else None} >= {bound2} ({elapsed:.1f}s)",
    )


def _random_instance(rng):
    n = rng.randint(1, 4)
    k = rng.randint(1, 3)
    close, rng_pairs = [], []
    for p in itertools.combinations(range(1, n + 1), 2):
        kind = rng.choice(("none", "close", "range"))
        if kind == "close":
            close.append(p)
        elif kind == "range":
            rng_pairs.append(p)
    subs = []
    for i in range(1, n + 1):
        c = rng.randint(1, k)
        if rng.random() < 0.5:
            subs.append(Message(i, c, MessageType.BEACON, (rng.randint(0, 3),)))
        else:
            subs.append(Message(i, c))
    return Topology.from_pairs(n, close=close, range=rng_pairs), k, tuple(subs)


def test_criterion_6_engine_oracle():
    rng = random.Random(20240615)
    instances = 12_000
    mismatches = scope_mismatches = 0
    for _ in range(instances):
        t, k, subs = _random_instance(rng)
        for scope in CollisionScope:
            cfg = ProtocolConfig(max_id=t.n, num_channels=k, collision_scope=scope)
            out = mac.step_slot(t, subs, cfg)
            air, heard = engine_oracle(t, subs, k, scope is CollisionScope.PER_RECEIVER)
            mismatches += out.on_air != air or out.delivered != heard
        full = Topology.from_pairs(t.n, range=itertools.combinations(range(1, t.n + 1), 2))
        a = mac.step_slot(full, subs, ProtocolConfig(max_id=t.n, num_channels=k))
        b = mac.step_slot(
            full, subs, ProtocolConfig(max_id=t.n, num_channels=k, collision_scope=CollisionScope.PER_RECEIVER)
        )
        scope_mismatches += a != b
    ok = mismatches == 0 and scope_mismatches == 0
    record(6, ok, f"{instances} instances ({mac.KERNEL} kernel): oracle mismatches={mismatches}, scope mismatches={scope_mismatches}")


def test_criterion_7_invariants(graphs):
    if not graphs:
        pytest.skip("criteria 1-3 did not run in this session")
    edges = sum(g.edge_count() for g in graphs)
    violations = [v for g in graphs for v in graph_violations(g)]
    ok = not violations
    detail = f"{len(graphs)} graphs, {edges} edges, {len(violations)} violations"
    if violations:
        detail += f" (first: {violations[0]})"
    record(7, ok, detail)


def test_criterion_8_determinism():
    commands = [
        ["verify", "narrow_bridge"],
        ["witness", "fig2a_three_nodes"],
        ["simulate", "binary_tree_h3", "--seeds", "1,2,3"],
    ]
    same = []
    for argv in commands:
        outs = [
            subprocess.run([sys.executable, "-m", "clustertree", *argv], capture_output=True, check=False).stdout
            for _ in range(2)
        ]
        same.append(outs[0] == outs[1] and bool(outs[0]))
    record(8, all(same), " ".join(f"{c[0]}={'identical' if s else 'DIFFERENT'}" for c, s in zip(commands, same)))


def test_criterion_9_scale_budget():
    t = balanced_binary_tree(8)
    cfg = ProtocolConfig(max_id=t.n, variant=Variant.NO_ACKS, collision_scope=CollisionScope.PER_RECEIVER)
    start = time.perf_counter()
    r = run(t, (1,) * t.n, cfg, 1, 5000)
    elapsed = time.perf_counter() - start
    ok = elapsed <= 10
    record(
        9,
        ok,
        f"511 nodes, {mac.KERNEL} kernel: {elapsed:.2f}s, formed={r.formed} in {r.slots_used} slots",
    )
