"""Protocol invariants checked state-by-state and edge-by-edge."""

from __future__ import annotations

from dataclasses import dataclass

from .protocol import Increase, NetworkState
from .types import ROOT, MessageType, ProtocolConfig, Role, role_transition_allowed


@dataclass(frozen=True)
class Violation:
    invariant: str
    detail: str

    def __str__(self) -> str:
        return f"{self.invariant}: {self.detail}"


def state_violations(ns: NetworkState) -> list[Violation]:
    out = []
    for s in ns.nodes:
        if s.joined and s.id != ROOT:
            if not s.pid:
                out.append(Violation("tree-shape", f"node {s.id} joined without a parent"))
                continue
            parent = ns.node(s.pid)
            if not parent.joined or s.tier != parent.tier + 1:
                out.append(Violation("tier", f"node {s.id} tier {s.tier}, parent {parent.id} tier {parent.tier}"))
        for child, _ in s.children:
            if ns.node(child).pid != s.id:
                out.append(Violation("duality", f"{child} listed under {s.id} but its parent is {ns.node(child).pid}"))
    # parent chains of joined nodes must end at the root
    for s in ns.nodes:
        if not s.joined:
            continue
        seen = set()
        cur = s
        while cur.id != ROOT:
            if cur.id in seen or not cur.pid:
                out.append(Violation("tree-shape", f"parent chain from {s.id} does not reach the root"))
                break
            seen.add(cur.id)
            cur = ns.node(cur.pid)
    return out


def edge_violations(src: NetworkState, dst: NetworkState, outcome, events, cfg: ProtocolConfig) -> list[Violation]:
    out = []
    for a, b in zip(src.nodes, dst.nodes):
        if a.role != b.role and not role_transition_allowed(a.role, b.role):
            out.append(Violation("role-monotonicity", f"node {a.id}: {a.role.short}->{b.role.short}"))
    gained = dst.joined_count() - src.joined_count()
    if gained < 0:
        out.append(Violation("increase-monotonicity", f"joined count dropped by {-gained}"))
    increases = sum(1 for e in events if isinstance(e, Increase))
    if increases != gained:
        out.append(Violation("increase-identity", f"{increases} increase events for {gained} new members"))
    if outcome is not None:
        for m in outcome.sent:
            if m.mtype is MessageType.BEACON:
                s = src.node(m.src)
                if s.role is not Role.CLUSTER_HEAD or s.tier % 2 != src.parity:
                    out.append(Violation("parity", f"beacon from {m.src} (tier {s.tier}) at parity {src.parity}"))
            if cfg.no_acks and m.mtype in (MessageType.BEACON_ACK, MessageType.ACK_RESPONSE):
                out.append(Violation("confinement", f"{m.mtype.name} sent by {m.src}"))
    return out


def graph_violations(g) -> list[Violation]:
    """Every invariant over every state and edge of an explored graph."""
    out = []
    for ns in g.states:
        out.extend(state_violations(ns))
    for e in g.all_edges():
        out.extend(edge_violations(g.states[e.src], g.states[e.dst], e.outcome, e.events, g.config))
    return out
