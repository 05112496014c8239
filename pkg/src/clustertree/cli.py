"""Command-line front end.

Exit codes: 0 property holds or analysis completed, 1 property fails,
2 usage or input error, 3 inconclusive (a depth or state budget was hit).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import explorer, scalability, simulator
from .scenario import Scenario, ScenarioError, builtin_names, load
from .trace import ReplayMismatch, render_path, replay, setup_header
from .types import ProtocolConfig, Variant

EXIT_OK, EXIT_FAILS, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
# a failing configuration outweighs an inconclusive one
_SEVERITY = {EXIT_OK: 0, EXIT_INCONCLUSIVE: 1, EXIT_FAILS: 2}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clustertree", description="Cluster-tree formation model checker and simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp, depth=True):
        sp.add_argument("scenario", help="built-in scenario name or path to a scenario file")
        sp.add_argument("--variant", choices=[v.value for v in Variant])
        sp.add_argument("--channels", type=_positive, help="number of channels")
        if depth:
            sp.add_argument("--depth", type=_positive, help="exploration depth bound in slots")
            sp.add_argument("--sweep", action="store_true", help="try every initial channel assignment")
        sp.add_argument("--trace", metavar="FILE", help="write a replayable slot trace to FILE")
        sp.add_argument("--format", choices=("text", "csv"), default="text")

    scenario_args(sub.add_parser("verify", help="check that formation always completes"))
    scenario_args(sub.add_parser("witness", help="print a shortest formation trace"))
    sim = sub.add_parser("simulate", help="seeded random runs")
    scenario_args(sim, depth=False)
    sim.add_argument("--seeds", type=_int_list)
    sim.add_argument("--slot-bound", type=_positive)
    bound = sub.add_parser("bound", help="closed-form lower bounds for balanced binary trees")
    bound.add_argument("--h", type=_int_list, default=[1, 2, 3, 8])
    bound.add_argument("--format", choices=("text", "csv"), default="text")
    sub.add_parser("scenarios", help="list built-in scenarios")
    rep = sub.add_parser("replay", help="re-run a trace file and compare every slot")
    rep.add_argument("file")
    return p


def _configure(args) -> Scenario:
    sc = load(args.scenario)
    cfg: ProtocolConfig = sc.config
    if args.variant:
        cfg = replace(cfg, variant=Variant(args.variant))
    if args.channels:
        cfg = replace(cfg, num_channels=args.channels)
    init = sc.initial_channels
    if getattr(args, "sweep", False):
        init = None
    if init is not None and max(init) > cfg.num_channels:
        raise ScenarioError(f"initial channel {max(init)} exceeds --channels {cfg.num_channels}")
    return replace(sc, config=cfg, initial_channels=init)


def _header(sc: Scenario, out) -> None:
    cfg = sc.config
    out(f"scenario: {sc.name}")
    out(f"topology: {sc.topology.describe()}")
    out(f"variant: {cfg.variant.value}  channels: {cfg.num_channels}  scope: {cfg.collision_scope.value}")


def _write_trace(path: str | None, sc: Scenario, init, lines: list[str]) -> None:
    if not path:
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# scenario {sc.name}\n{setup_header(sc.topology, sc.config, init)}\n")
        fh.writelines(line + "\n" for line in lines)


def _lasso_lines(g, v) -> list[str]:
    path = list(v.stem) + list(v.loop)
    return render_path(path, g.states, marks={len(v.stem): "# loop"})


def cmd_verify(args, out) -> int:
    sc = _configure(args)
    depth = args.depth or sc.analysis.depth
    csv = args.format == "csv"
    if csv:
        out("initial_channels,verdict,class,states,edges")
    else:
        _header(sc, out)
    configs = list(explorer.channel_assignments(sc.config)) if sc.sweep else [sc.initial_channels]
    worst = EXIT_OK
    for init in configs:
        try:
            g = explorer.explore(sc.topology, init, sc.config, depth)
        except explorer.ResourceError as exc:
            label = ",".join(map(str, init))
            out(f"{label.replace(',', ' ')},inconclusive,,," if csv else f"initial channels {label}: Inconclusive ({exc})")
            worst = max(worst, EXIT_INCONCLUSIVE, key=_SEVERITY.get)
            continue
        v = explorer.check_formation(g)
        label = ",".join(map(str, init))
        if csv:
            cls = v.failure_class.value if v.failure_class else ""
            out(f"{label.replace(',', ' ')},{v.kind},{cls},{len(g.states)},{g.edge_count()}")
        else:
            out(f"initial channels {label}: states={len(g.states)} edges={g.edge_count()} verdict={v}")
        code = {"holds": EXIT_OK, "fails": EXIT_FAILS, "inconclusive": EXIT_INCONCLUSIVE}[v.kind]
        worst = max(worst, code, key=_SEVERITY.get)
        if v.fails and not sc.sweep:
            lines = _lasso_lines(g, v)
            if not csv:
                out(f"class: {v.failure_class.value}")
                for line in lines:
                    out(line)
            _write_trace(args.trace, sc, init, lines)
    return worst


def cmd_witness(args, out) -> int:
    sc = _configure(args)
    depth = args.depth or sc.analysis.depth
    _header(sc, out)
    if sc.sweep:
        result = explorer.sweep_initial_configs(sc.topology, sc.config, depth)
        for init, entry in result.entries.items():
            w = entry.witness if entry.witness is not None else "none"
            out(f"initial channels {','.join(map(str, init))}: witness={w} verdict={entry.verdict}")
        init = result.best_config()
        if init is None:
            out("no configuration reaches the goal")
            return EXIT_FAILS
    else:
        init = sc.initial_channels
    g = explorer.explore(sc.topology, init, sc.config, depth)
    try:
        path = explorer.shortest_witness(g)
    except explorer.WitnessAbsent:
        out("no execution reaches the goal")
        return EXIT_INCONCLUSIVE if g.truncated else EXIT_FAILS
    frames, ms = scalability.to_time(len(path), sc.config)
    out(f"minimum witness: {len(path)} slots (initial channels {','.join(map(str, init))})")
    out(f"  = {frames} slotframes = {ms} ms ({scalability.CONVENTION})")
    if sc.config.max_id == 3:
        figs = scalability.REFERENCE_FIGURES
        out(f"  published figures: \"{figs['three_node_slotframes']}\", \"{figs['three_node_ms']}\""
            f" (note: {figs['three_node_ms']} corresponds to {frames} slotframes under this convention)")
    lines = render_path(path, g.states)
    for line in lines:
        out(line)
    _write_trace(args.trace, sc, init, lines)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    sc = _configure(args)
    seeds = args.seeds or list(sc.analysis.seeds)
    bound = args.slot_bound or sc.analysis.slot_bound
    init = sc.initial_channels or tuple([1] * sc.topology.n)
    if args.trace and len(seeds) != 1:
        raise UsageError("--trace with simulate needs exactly one seed")
    runs = [simulator.run(sc.topology, init, sc.config, s, bound, trace=bool(args.trace)) for s in seeds]
    summary = simulator.BatchSummary(tuple(runs))
    if args.format == "csv":
        out(simulator.to_csv(runs).rstrip("\n"))
        out(f"# {summary.describe()}")
    else:
        _header(sc, out)
        out(f"{'seed':>6} {'formed':>6} {'slots':>6} {'frames':>7} {'ms':>9}")
        for r in runs:
            out(f"{r.seed:>6} {'yes' if r.formed else 'no':>6} {r.slots_used:>6} {r.slotframes:>7} {r.milliseconds:>9}")
        out(f"summary: {summary.describe()}")
    if args.trace:
        lines = []
        for r in runs:
            lines.append(f"# seed {r.seed}")
            lines.extend(r.trace)
        _write_trace(args.trace, sc, init, lines)
    return EXIT_OK


def cmd_bound(args, out) -> int:
    if any(h < 1 for h in args.h):
        raise UsageError("--h values must be at least 1")
    rows = scalability.report(args.h)
    out(scalability.format_table(rows, args.format).rstrip("\n"))
    if args.format == "text":
        out(scalability.reference_notes().rstrip("\n"))
    return EXIT_OK


def cmd_scenarios(args, out) -> int:
    for name in builtin_names():
        sc = load(name)
        out(f"{name:<22} {sc.analysis.kind:<9} {sc.description}")
    return EXIT_OK


def cmd_replay(args, out) -> int:
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    try:
        n = replay(text)
    except ReplayMismatch as exc:
        out(str(exc))
        return EXIT_FAILS
    out(f"replayed {n} slots: identical")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "witness": cmd_witness,
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "scenarios": cmd_scenarios,
    "replay": cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    def out(line: str) -> None:
        print(line)

    try:
        return COMMANDS[args.command](args, out)
    except (ScenarioError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except explorer.ResourceError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
