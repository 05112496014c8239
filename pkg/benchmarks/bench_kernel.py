"""Compare the compiled slot kernel with the pure-Python one.

    python benchmarks/bench_kernel.py [--repeat N] [--height H]

Two workloads: raw ``resolve`` calls on a 511-node tree, and a full seeded
simulator run. Each is timed with both kernels by temporarily swapping the
module ``clustertree.mac`` dispatches to.
"""

from __future__ import annotations

import argparse
import random
import timeit
from array import array
from contextlib import contextmanager

from clustertree import _slot_py, mac, simulator
from clustertree.topology import balanced_binary_tree
from clustertree.types import CollisionScope, ProtocolConfig, Variant

try:
    from clustertree import _slot as _slot_c
except ImportError:
    _slot_c = None


@contextmanager
def using(kernel):
    saved = mac._kernel
    mac._kernel = kernel
    try:
        yield
    finally:
        mac._kernel = saved


def resolve_workload(height: int, slots: int = 2000):
    t = balanced_binary_tree(height)
    reach = mac.reach_matrix(t)
    rng = random.Random(1)
    frames = []
    for _ in range(slots):
        chans = array("i", [0] + [rng.randint(1, 3) for _ in range(t.n)])
        tx = array("i", [0] + [int(rng.random() < 0.1) for _ in range(t.n)])
        frames.append((chans, tx))

    def go(kernel):
        for chans, tx in frames:
            kernel.resolve(chans, tx, 3, reach, True)

    return go


def simulate_workload(height: int):
    t = balanced_binary_tree(height)
    cfg = ProtocolConfig(max_id=t.n, variant=Variant.NO_ACKS, collision_scope=CollisionScope.PER_RECEIVER)

    def go(kernel):
        with using(kernel):
            simulator.run(t, (1,) * t.n, cfg, 1, 5000)

    return go


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--height", type=int, default=8)
    args = p.parse_args(argv)
    kernels = [("python", _slot_py)] + ([("compiled", _slot_c)] if _slot_c else [])
    if _slot_c is None:
        print("compiled kernel not built; timing the pure kernel only")
    workloads = [
        (f"resolve x2000 (h={args.height})", resolve_workload(args.height)),
        (f"simulate seed 1 (h={args.height})", simulate_workload(args.height)),
    ]
    print(f"{'workload':<28} {'kernel':<9} {'best s':>8}")
    for label, go in workloads:
        best = {}
        for name, kernel in kernels:
            best[name] = min(timeit.repeat(lambda: go(kernel), number=1, repeat=args.repeat))
            print(f"{label:<28} {name:<9} {best[name]:>8.3f}")
        if len(best) == 2:
            print(f"{'':<28} {'speed-up':<9} {best['python'] / best['compiled']:>7.1f}x")


if __name__ == "__main__":
    main()
