"""Failure detection events and every model parameter derived from the fixed primary routing."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

from .routing import PrimaryRouting
from .topology import Arc, Topology


class FailureEvent(NamedTuple):
    """Node ``n`` detects a failure while transmitting to downstream node ``m``."""

    n: str
    m: str

    @property
    def reverse(self) -> "FailureEvent":
        return FailureEvent(self.m, self.n)

    def label(self) -> str:
        return f"{self.n},{self.m}"


@dataclass(frozen=True)
class ScenarioData:
    topology: Topology
    routing: PrimaryRouting
    events: tuple[FailureEvent, ...]
    affected: dict[FailureEvent, tuple[int, ...]]
    d1: dict[FailureEvent, tuple[int, ...]]
    d2: dict[FailureEvent, tuple[int, ...]]
    lam: dict[tuple[FailureEvent, int], int]
    u: dict[FailureEvent, dict[Arc, float]]
    v: dict[str, dict[Arc, float]]
    incident: dict[str, tuple[Arc, ...]]

    def pairs(self):
        """Every (event, demand id) combination that needs a backup path."""
        for f in self.events:
            for d in self.affected[f]:
                yield f, d

    def affected_or_empty(self, f: FailureEvent) -> tuple[int, ...]:
        return self.affected.get(f, ())

    def detectors_of(self, m: str) -> list[str]:
        return [f.n for f in self.events if f.m == m]

    def forbidden(self, f: FailureEvent, demand_id: int) -> set[Arc]:
        """Arcs a backup for ``demand_id`` under ``f`` may not use."""
        if demand_id in self.d2[f]:
            return {(f.n, f.m), (f.m, f.n)}
        return set(self.incident[f.m])

    def to_json(self) -> dict:
        return {
            "events": [
                {
                    "n": f.n,
                    "m": f.m,
                    "D1": list(self.d1[f]),
                    "D2": list(self.d2[f]),
                    "lambda": {str(d): self.lam[(f, d)] for d in self.affected[f]},
                }
                for f in self.events
            ]
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def build_scenarios(topology: Topology, routing: PrimaryRouting) -> ScenarioData:
    routing.check(topology)
    by_arc: dict[Arc, list[int]] = {}
    lam = {}
    for d in routing.demands:
        for k, arc in enumerate(routing.paths[d.id]):
            by_arc.setdefault(arc, []).append(d.id)
            lam[(FailureEvent(*arc), d.id)] = k

    events = tuple(sorted(FailureEvent(*a) for a in by_arc))
    affected = {f: tuple(sorted(by_arc[f])) for f in events}
    d1, d2 = {}, {}
    for f in events:
        d1[f] = tuple(d for d in affected[f] if routing.by_id[d].dst != f.m)
        d2[f] = tuple(d for d in affected[f] if routing.by_id[d].dst == f.m)

    total = routing.load
    u = {}
    for f in events:
        load = dict(total)
        for d in set(affected[f]) | set(affected.get(f.reverse, ())):
            for a in routing.paths[d]:
                load[a] -= routing.by_id[d].bandwidth
        u[f] = load

    incident = {m: tuple(topology.incident_arcs(m)) for m in topology.nodes}
    v = {}
    for m in topology.nodes:
        load: dict[Arc, float] = {}
        for d in routing.demands:
            if m in routing.nodes(d.id):
                continue
            for a in routing.paths[d.id]:
                load[a] = load.get(a, 0.0) + d.bandwidth
        v[m] = load

    return ScenarioData(topology, routing, events, affected, d1, d2, lam, u, v, incident)
