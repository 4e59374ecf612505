"""Backup plans decoded from solver output, plus their on-disk artifact form."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

from .milp import MilpInstance
from .routing import PrimaryRouting, lex_shortest_path, route_primary
from .scenarios import FailureEvent, ScenarioData, build_scenarios
from .solver import SolveResult
from .topology import Arc, Topology, arcs_to_nodes, load_topology, nodes_to_arcs

log = logging.getLogger(__name__)

ARTIFACT_FORMAT = "detourplan-plan/1"


class ExtractionError(RuntimeError):
    pass


class StaleArtifactError(ValueError):
    pass


@dataclass(frozen=True)
class BackupRoute:
    event: FailureEvent
    demand: int
    path: tuple[Arc, ...]
    reroute_node: str
    backward_hops: int
    h_value: int | None = None
    spurious_arcs: int = 0

    @property
    def nodes(self) -> list[str]:
        return arcs_to_nodes(self.path)


@dataclass
class BackupPlan:
    model: str
    routes: dict[tuple[FailureEvent, int], BackupRoute]
    status: str = "optimal"
    objective: float | None = None
    mu: dict[Arc, float] = field(default_factory=dict)
    phi: dict[Arc, float] = field(default_factory=dict)

    @property
    def spurious_cycles(self) -> int:
        """Number of (event, demand) pairs whose y-support carried arcs off the extracted path."""
        return sum(1 for r in self.routes.values() if r.spurious_arcs)

    def z_support(self) -> dict[int, set[Arc]]:
        out: dict[int, set[Arc]] = {}
        for (_, d), r in self.routes.items():
            out.setdefault(d, set()).update(r.path)
        return out


def divergence(primary: tuple[Arc, ...], backup: tuple[Arc, ...]) -> int:
    """Number of leading arcs the backup shares with the primary."""
    k = 0
    while k < min(len(primary), len(backup)) and primary[k] == backup[k]:
        k += 1
    return k


def make_route(sc: ScenarioData, f: FailureEvent, d: int, path, h_value=None, spurious=0) -> BackupRoute:
    primary = sc.routing.paths[d]
    lam = sc.lam[(f, d)]
    k = divergence(primary, tuple(path))
    if k > lam:
        raise ExtractionError(f"backup for demand {d} under {f} traverses the failed arc")
    reroute = arcs_to_nodes(primary)[k]
    return BackupRoute(f, d, tuple(path), reroute, lam - k, h_value, spurious)


def _support_path(topology: Topology, support: set[Arc], src: str, dst: str) -> list[Arc] | None:
    nodes = lex_shortest_path(topology.successors, src, dst, lambda a: a in support)
    return None if nodes is None else nodes_to_arcs(nodes)


def extract_plan(sc: ScenarioData, inst: MilpInstance, result: SolveResult) -> BackupPlan:
    """Decode a solved instance into per-(event, demand) backup routes.

    Arcs selected by the solver but unreachable from the source (detached
    circulations) are discarded and counted in ``spurious_arcs``.
    """
    if result.values is None:
        raise ExtractionError(f"no assignment to decode (status {result.status})")
    vals = result.values
    arcs = sc.topology.arcs
    routes = {}
    dropped = 0
    for f, d in sc.pairs():
        dem = sc.routing.by_id[d]
        ys = inst.x[d] if inst.x else inst.y[(f, d)]
        support = {a for a, k in zip(arcs, ys) if vals[k] > 0.5}
        path = _support_path(sc.topology, support, dem.src, dem.dst)
        if path is None:
            raise ExtractionError(f"no {dem.src}->{dem.dst} walk in the solution for demand {d} under {f}")
        extra = len(support) - len(path)
        dropped += bool(extra)
        h = int(round(vals[inst.h[(f, d)]])) if (f, d) in inst.h else None
        routes[(f, d)] = make_route(sc, f, d, path, h, extra)
    if dropped:
        log.warning("%s: discarded detached circulations for %d (event, demand) pairs", inst.name, dropped)
    plan = BackupPlan(inst.spec.label if inst.spec else inst.name, routes, result.status, result.objective)
    if inst.mu:
        plan.mu = {a: vals[k] for a, k in zip(arcs, inst.mu)}
        plan.phi = {a: vals[k] for a, k in zip(arcs, inst.phi)}
    return plan


def check_plan(sc: ScenarioData, plan: BackupPlan) -> list[str]:
    """Structural problems with a plan; empty when every invariant holds."""
    problems = []
    for f, d in sc.pairs():
        r = plan.routes.get((f, d))
        if r is None:
            problems.append(f"missing route for demand {d} under {f}")
            continue
        dem = sc.routing.by_id[d]
        nodes = r.nodes
        if not nodes or nodes[0] != dem.src or nodes[-1] != dem.dst:
            problems.append(f"demand {d} under {f}: route does not join {dem.src} to {dem.dst}")
        if len(set(nodes)) != len(nodes):
            problems.append(f"demand {d} under {f}: route is not simple")
        bad = set(r.path) & sc.forbidden(f, d)
        if bad:
            problems.append(f"demand {d} under {f}: route uses failed element arcs {sorted(bad)}")
        if not set(r.path) <= set(sc.topology.arcs):
            problems.append(f"demand {d} under {f}: route uses arcs outside the topology")
        lam = sc.lam[(f, d)]
        if r.backward_hops > lam:
            problems.append(f"demand {d} under {f}: backward hops {r.backward_hops} > {lam}")
        elif sc.routing.nodes(d)[lam - r.backward_hops] != r.reroute_node:
            problems.append(f"demand {d} under {f}: reroute node not at primary index {lam - r.backward_hops}")
    return problems


# ---------------------------------------------------------------- artifacts


def _fingerprint(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k != "fingerprint"}
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def plan_to_json(topology: Topology, routing: PrimaryRouting, plan: BackupPlan | None, model: str,
                 status: str, objective: float | None = None, extra: dict | None = None) -> dict:
    doc = {
        "format": ARTIFACT_FORMAT,
        "model": model,
        "status": status,
        "objective": objective,
        "topology": topology.to_json(),
        "routing": routing.to_json(),
        "routes": [],
        "mu": {},
        "phi": {},
    }
    if extra:
        doc.update(extra)
    if plan is not None:
        doc["routes"] = [
            {
                "demand": r.demand,
                "event": [r.event.n, r.event.m],
                "path": r.nodes,
                "reroute": r.reroute_node,
                "backward_hops": r.backward_hops,
                "h": r.h_value,
                "spurious_arcs": r.spurious_arcs,
            }
            for (f, d), r in sorted(plan.routes.items())
        ]
        doc["mu"] = {f"{i},{j}": round(v, 9) for (i, j), v in sorted(plan.mu.items())}
        doc["phi"] = {f"{i},{j}": round(v, 9) for (i, j), v in sorted(plan.phi.items())}
    doc["fingerprint"] = _fingerprint(doc)
    return doc


@dataclass
class LoadedPlan:
    topology: Topology
    routing: PrimaryRouting
    scenarios: ScenarioData
    plan: BackupPlan | None
    doc: dict


def plan_from_json(doc: dict) -> LoadedPlan:
    """Rebuild everything a plan artifact refers to, rejecting tampered or outdated files."""
    if not isinstance(doc, dict) or doc.get("format") != ARTIFACT_FORMAT:
        raise StaleArtifactError("not a plan artifact (format tag missing or unknown)")
    if doc.get("fingerprint") != _fingerprint(doc):
        raise StaleArtifactError("plan artifact fingerprint mismatch: file was modified after it was written")
    topology = load_topology(doc["topology"])
    routing = PrimaryRouting.from_json(doc["routing"])
    fresh = route_primary(topology, list(routing.demands), routing.w_cap)
    if fresh.paths != routing.paths:
        raise StaleArtifactError("stored primary routing no longer matches a fresh routing of the stored topology")
    sc = build_scenarios(topology, routing)
    plan = None
    if doc["routes"]:
        routes = {}
        for e in doc["routes"]:
            f = FailureEvent(*e["event"])
            d = int(e["demand"])
            if (f, d) not in sc.lam:
                raise StaleArtifactError(f"route for demand {d} under {f} does not match any failure event")
            routes[(f, d)] = BackupRoute(f, d, tuple(nodes_to_arcs(e["path"])), e["reroute"],
                                         int(e["backward_hops"]), e.get("h"), int(e.get("spurious_arcs", 0)))
        plan = BackupPlan(doc["model"], routes, doc["status"], doc.get("objective"))
        plan.mu = {tuple(k.split(",")): v for k, v in doc.get("mu", {}).items()}
        plan.phi = {tuple(k.split(",")): v for k, v in doc.get("phi", {}).items()}
    return LoadedPlan(topology, routing, sc, plan, doc)


def read_plan(path) -> LoadedPlan:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise StaleArtifactError(f"plan artifact is not valid JSON: {exc}") from None
    try:
        return plan_from_json(doc)
    except (KeyError, TypeError) as exc:
        raise StaleArtifactError(f"plan artifact is missing data: {exc!r}") from None
