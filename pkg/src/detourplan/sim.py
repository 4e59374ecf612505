"""Packet-level replay of crankback recovery on stateful switches.

Each switch keeps a per-demand flow state (``DEFAULT`` or a detour for one
failure event) and a global up/down state per port. When a node finds the
next primary port down it tags the packet with the failure event and sends it
back along the primary path. The first switch whose plan says "reroute here"
flips its flow state and pushes the packet onto the detour. Later packets are
tagged and detoured right there. The tag is popped where the detour rejoins
the primary path.

Packets are injected one at a time and fully processed before the next one,
so there are never packets in flight during a state transition.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .plans import BackupPlan, BackupRoute
from .routing import PrimaryRouting
from .scenarios import FailureEvent, ScenarioData
from .topology import Topology

LINK = "link"
NODE = "node"

DEFAULT = "DEFAULT"

FORWARD_PRIMARY = "forward_primary"
DETECT_TAG_REVERSE = "detect_tag_reverse"
REVERSE_HOP = "reverse_hop"
STATE_TRANSITION = "state_transition"
FORWARD_DETOUR = "forward_detour"
POP_TAG = "pop_tag"
DELIVER = "deliver"
DROP = "drop"

# tag phases
BACKWARD = "backward"
DETOUR = "detour"


class SimulationFault(RuntimeError):
    pass


@dataclass
class Switch:
    name: str
    ports: dict[str, bool] = field(default_factory=dict)
    flow_state: dict[int, object] = field(default_factory=dict)

    def state(self, demand: int):
        return self.flow_state.get(demand, DEFAULT)


@dataclass
class Packet:
    demand: int
    seq: int
    tag: FailureEvent | None = None
    phase: str | None = None
    log: list[dict] = field(default_factory=list)


@dataclass
class SimTrace:
    event: FailureEvent
    kind: str
    packets: list[Packet] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)
    transitions: list[tuple[str, int]] = field(default_factory=list)

    @property
    def counters(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for p in self.packets:
            for rec in p.log:
                out[rec["action"]] = out.get(rec["action"], 0) + 1
        return out

    def delivered(self, demand: int | None = None) -> tuple[int, int]:
        ps = [p for p in self.packets if demand is None or p.demand == demand]
        return sum(1 for p in ps if p.log and p.log[-1]["action"] == DELIVER), len(ps)

    def jsonl(self) -> str:
        lines = []
        for p in self.packets:
            for k, rec in enumerate(p.log):
                lines.append(json.dumps({
                    "event": self.event.label(),
                    "kind": self.kind,
                    "demand": p.demand,
                    "packet": p.seq,
                    "step": k,
                    **rec,
                }, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class _Rules:
    """Forwarding rules for one demand under one failure event."""

    primary: list[str]
    reroute: str
    detour_next: dict[str, str]
    pop_node: str


def _compile(routing: PrimaryRouting, route: BackupRoute) -> _Rules:
    primary = routing.nodes(route.demand)
    backup = route.nodes
    k = primary.index(route.reroute_node)
    if backup[:k + 1] != primary[:k + 1]:
        raise SimulationFault(f"demand {route.demand}: backup does not follow the primary up to its reroute node")
    q = len(backup) - 1
    while q - 1 > k and primary[-(len(backup) - q + 1):] == backup[q - 1:]:
        q -= 1
    detour_next = {backup[i]: backup[i + 1] for i in range(k, q)}
    return _Rules(primary, route.reroute_node, detour_next, backup[q])


def _port_down(topology: Topology, event: FailureEvent, kind: str) -> set[tuple[str, str]]:
    if kind == LINK:
        return {(event.n, event.m), (event.m, event.n)}
    return set(topology.incident_arcs(event.m))


def _replay_demand(topology, routing, route: BackupRoute, event, kind, packet_count, trace: SimTrace):
    rules = _compile(routing, route)
    dem = routing.by_id[route.demand]
    down = _port_down(topology, event, kind)
    switches = {n: Switch(n, {j: (n, j) not in down for j in topology.successors[n]}) for n in topology.nodes}
    ttl = 4 * len(topology.nodes) + 4

    for seq in range(packet_count):
        pkt = Packet(dem.id, seq)
        trace.packets.append(pkt)
        here = dem.src

        def record(node, action, nxt=None):
            pkt.log.append({"node": node, "action": action, "tag": pkt.tag.label() if pkt.tag else None, "next": nxt,
                            "phase": pkt.phase})

        def send(node, nxt, action):
            if not switches[node].ports.get(nxt, False):
                trace.faults.append(f"demand {dem.id} packet {seq}: {action} from {node} to {nxt} over a down port")
                record(node, DROP, nxt)
                return None
            record(node, action, nxt)
            return nxt

        for _ in range(ttl):
            sw = switches[here]
            if here == dem.dst:
                if pkt.tag is not None:
                    record(here, POP_TAG)
                    pkt.tag, pkt.phase = None, None
                record(here, DELIVER)
                break
            if pkt.tag is None:
                state = sw.state(dem.id)
                if state != DEFAULT:
                    pkt.tag, pkt.phase = state, DETOUR
                    here = send(here, rules.detour_next[here], FORWARD_DETOUR)
                elif here not in rules.primary[:-1]:
                    trace.faults.append(f"demand {dem.id} packet {seq}: untagged packet off the primary at {here}")
                    record(here, DROP)
                    here = None
                else:
                    nxt = rules.primary[rules.primary.index(here) + 1]
                    if sw.ports[nxt]:
                        here = send(here, nxt, FORWARD_PRIMARY)
                    else:
                        pkt.tag, pkt.phase = FailureEvent(here, nxt), BACKWARD
                        record(here, DETECT_TAG_REVERSE)
                        here = _backward_step(here, sw, pkt, rules, event, trace, record, send)
            elif pkt.phase == BACKWARD:
                here = _backward_step(here, sw, pkt, rules, event, trace, record, send)
            else:
                if here == rules.pop_node:
                    record(here, POP_TAG)
                    pkt.tag, pkt.phase = None, None
                    continue
                nxt = rules.detour_next.get(here)
                if nxt is None:
                    trace.faults.append(f"demand {dem.id} packet {seq}: no detour rule at {here}")
                    record(here, DROP)
                    here = None
                else:
                    here = send(here, nxt, FORWARD_DETOUR)
            if here is None:
                break
        else:
            trace.faults.append(f"demand {dem.id} packet {seq}: hop limit exceeded")
            record(here, DROP)


def _backward_step(here, sw, pkt, rules, event, trace, record, send):
    """Handle a tagged packet travelling back toward the source at ``here``."""
    if pkt.tag != event:
        trace.faults.append(f"demand {pkt.demand}: detected {pkt.tag} while replaying {event}")
    if here == rules.reroute:
        sw.flow_state[pkt.demand] = pkt.tag
        trace.transitions.append((here, pkt.demand))
        record(here, STATE_TRANSITION)
        pkt.phase = DETOUR
        return send(here, rules.detour_next[here], FORWARD_DETOUR)
    i = rules.primary.index(here)
    if i == 0:
        trace.faults.append(f"demand {pkt.demand}: tagged packet reached the source without a reroute node")
        record(here, DROP)
        return None
    return send(here, rules.primary[i - 1], REVERSE_HOP)


def run_failure_scenario(topology: Topology, routing: PrimaryRouting, plan: BackupPlan, event: FailureEvent,
                         failure_kind: str = LINK, packet_count: int = 3, scenarios: ScenarioData | None = None) -> SimTrace:
    """Replay ``event`` for every demand whose primary crosses it.

    Under ``failure_kind="node"`` demands destined to ``event.m`` are replayed
    with link semantics, since their packets must still reach ``m``.
    """
    if failure_kind not in (LINK, NODE):
        raise ValueError(f"failure kind must be 'link' or 'node', got {failure_kind!r}")
    if packet_count < 1:
        raise ValueError("packet_count must be positive")
    affected = [d for (f, d) in plan.routes if f == event]
    if scenarios is not None:
        if event not in scenarios.affected:
            raise ValueError(f"{event} is not a failure detection event of this routing")
        affected = list(scenarios.affected[event])
    if not affected:
        raise ValueError(f"plan has no routes for {event}")
    trace = SimTrace(event, failure_kind)
    for d in sorted(affected):
        route = plan.routes.get((event, d))
        if route is None:
            trace.faults.append(f"plan does not cover demand {d} under {event}")
            continue
        kind = LINK if routing.by_id[d].dst == event.m else failure_kind
        try:
            _replay_demand(topology, routing, route, event, kind, packet_count, trace)
        except SimulationFault as exc:
            trace.faults.append(str(exc))
    return trace


@dataclass
class ValidationReport:
    events: int = 0
    replays: int = 0
    injected: int = 0
    delivered: int = 0
    delivery: dict[str, float] = field(default_factory=dict)
    avoidance_violations: list[str] = field(default_factory=list)
    h_mismatches: list[str] = field(default_factory=list)
    h_variable_mismatches: list[str] = field(default_factory=list)
    loops: list[str] = field(default_factory=list)
    unsteady: list[str] = field(default_factory=list)
    nonlocal_state: list[str] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.delivered == self.injected and not self.avoidance_violations and not self.h_mismatches
                and not self.loops and not self.unsteady and not self.nonlocal_state and not self.faults)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "events": self.events,
            "replays": self.replays,
            "injected": self.injected,
            "delivered": self.delivered,
            "delivery_rate": self.delivered / self.injected if self.injected else 1.0,
            "per_event_delivery": self.delivery,
            "avoidance_violations": self.avoidance_violations,
            "h_mismatches": self.h_mismatches,
            "h_variable_mismatches": self.h_variable_mismatches,
            "loops": self.loops,
            "unsteady": self.unsteady,
            "nonlocal_state": self.nonlocal_state,
            "faults": self.faults,
        }


def _touches_failure(pkt: Packet, event: FailureEvent, kind: str, dst: str) -> bool:
    """True if the packet used, or tried to use, an element that is down in this replay."""
    failed = {(event.n, event.m), (event.m, event.n)}
    for rec in pkt.log:
        if rec["next"] is not None and (rec["node"], rec["next"]) in failed:
            return True
        if kind == NODE and dst != event.m and event.m in (rec["node"], rec["next"]):
            return True
    return False


def check_trace(trace: SimTrace, sc: ScenarioData, plan: BackupPlan, report: ValidationReport):
    f = trace.event
    routing = sc.routing
    by_demand: dict[int, list[Packet]] = {}
    for p in trace.packets:
        by_demand.setdefault(p.demand, []).append(p)
    bad_routes = set()
    for d, pkts in by_demand.items():
        route = plan.routes[(f, d)]
        kind = LINK if routing.by_id[d].dst == f.m else trace.kind
        for p in pkts:
            if _touches_failure(p, f, kind, routing.by_id[d].dst):
                bad_routes.add(d)
            seen = set()
            for rec in p.log:
                key = (rec["node"], rec["tag"], rec["phase"])
                if rec["action"] in (FORWARD_PRIMARY, REVERSE_HOP, FORWARD_DETOUR):
                    if key in seen:
                        report.loops.append(f"{f.label()} {trace.kind} demand {d} packet {p.seq} revisits {rec['node']}")
                        break
                    seen.add(key)
        first = pkts[0]
        hops = sum(1 for rec in first.log if rec["action"] == REVERSE_HOP)
        if hops != route.backward_hops:
            report.h_mismatches.append(f"{f.label()} {trace.kind} demand {d}: {hops} reverse hops, plan says {route.backward_hops}")
        if route.h_value is not None and route.h_value != route.backward_hops:
            report.h_variable_mismatches.append(f"{f.label()} demand {d}: h={route.h_value}, path gives {route.backward_hops}")
        later = [[(r["node"], r["action"]) for r in p.log] for p in pkts[1:]]
        if any(x != later[0] for x in later[1:]):
            report.unsteady.append(f"{f.label()} {trace.kind} demand {d}: packets after the transition differ")
        allowed = set(routing.nodes(d)) | set(route.nodes)
        for node, dd in trace.transitions:
            if dd == d and node not in allowed:
                report.nonlocal_state.append(f"{f.label()} demand {d}: state change at {node}")
    for d in sorted(bad_routes):
        report.avoidance_violations.append(f"{f.label()} {trace.kind} demand {d}")


def validate_plan(topology: Topology, routing: PrimaryRouting, plan: BackupPlan, scenarios: ScenarioData,
                  packet_count: int = 3, kinds=(LINK, NODE), traces: list | None = None) -> ValidationReport:
    """Replay every event under both failure readings and collect findings."""
    report = ValidationReport()
    flagged = set()
    for f in scenarios.events:
        report.events += 1
        for kind in kinds:
            trace = run_failure_scenario(topology, routing, plan, f, kind, packet_count, scenarios)
            report.replays += 1
            ok, total = trace.delivered()
            report.injected += total
            report.delivered += ok
            report.delivery[f"{f.label()}/{kind}"] = ok / total if total else 1.0
            report.faults += [f"{f.label()} {kind}: {x}" for x in trace.faults]
            sub = ValidationReport()
            check_trace(trace, scenarios, plan, sub)
            for entry in sub.avoidance_violations:
                d = int(entry.rsplit(" ", 1)[1])
                if (f, d) not in flagged:
                    flagged.add((f, d))
                    report.avoidance_violations.append(entry)
            report.h_mismatches += sub.h_mismatches
            if kind == kinds[0]:
                report.h_variable_mismatches += sub.h_variable_mismatches
            report.loops += sub.loops
            report.unsteady += sub.unsteady
            report.nonlocal_state += sub.nonlocal_state
            if traces is not None:
                traces.append(trace)
    return report
