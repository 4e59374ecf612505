"""Demand construction and capacity-constrained min-hop primary routing."""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .topology import Arc, Topology, arcs_to_nodes

EPS = 1e-9


class RoutingError(ValueError):
    pass


class RoutingInfeasible(RoutingError):
    def __init__(self, demand: "Demand", message: str = ""):
        super().__init__(message or f"no capacity-feasible path for demand {demand.id} ({demand.src} -> {demand.dst}, b={demand.bandwidth})")
        self.demand = demand


@dataclass(frozen=True)
class Demand:
    id: int
    src: str
    dst: str
    bandwidth: float

    def __post_init__(self):
        if self.src == self.dst:
            raise RoutingError(f"demand {self.id}: source equals destination")
        if not self.bandwidth > 0:
            raise RoutingError(f"demand {self.id}: bandwidth must be positive")


def build_demands(topology: Topology, bandwidth: float = 1.0) -> list[Demand]:
    """One demand per ordered pair of distinct edge nodes, ids in (src, dst) order."""
    edge = sorted(topology.edge_nodes)
    if len(edge) < 2:
        raise RoutingError(f"{topology.name}: need at least 2 edge nodes, have {len(edge)}")
    return [Demand(k, s, t, bandwidth) for k, (s, t) in enumerate(itertools.permutations(edge, 2))]


@dataclass(frozen=True)
class PrimaryRouting:
    demands: tuple[Demand, ...]
    paths: dict[int, tuple[Arc, ...]]
    w_cap: float

    @cached_property
    def by_id(self) -> dict[int, Demand]:
        return {d.id: d for d in self.demands}

    @cached_property
    def load(self) -> dict[Arc, float]:
        out: dict[Arc, float] = {}
        for d in self.demands:
            for a in self.paths[d.id]:
                out[a] = out.get(a, 0.0) + d.bandwidth
        return out

    @cached_property
    def _arc_sets(self) -> dict[int, frozenset]:
        return {d: frozenset(p) for d, p in self.paths.items()}

    def uses(self, demand_id: int, arc: Arc) -> bool:
        return arc in self._arc_sets[demand_id]

    def beta(self, demand_id: int, arc: Arc) -> int:
        """0 if ``arc`` lies on the demand's primary path, else 1."""
        return 0 if self.uses(demand_id, arc) else 1

    def nodes(self, demand_id: int) -> list[str]:
        return arcs_to_nodes(self.paths[demand_id])

    def hops(self, demand_id: int) -> int:
        return len(self.paths[demand_id])

    def check(self, topology: Topology):
        for d in self.demands:
            path = self.paths[d.id]
            nodes = self.nodes(d.id)
            if not path or nodes[0] != d.src or nodes[-1] != d.dst:
                raise RoutingError(f"demand {d.id}: path does not join {d.src} to {d.dst}")
            if len(set(nodes)) != len(nodes):
                raise RoutingError(f"demand {d.id}: path is not simple")
            for a in path:
                if a not in topology.capacity:
                    raise RoutingError(f"demand {d.id}: arc {a} not in topology")
        for a, load in self.load.items():
            if load > self.w_cap * topology.capacity[a] + EPS:
                raise RoutingError(f"arc {a} primary load {load} exceeds {self.w_cap} * {topology.capacity[a]}")

    def to_json(self) -> dict:
        return {
            "w_cap": self.w_cap,
            "demands": [
                {"id": d.id, "src": d.src, "dst": d.dst, "bandwidth": d.bandwidth, "path": self.nodes(d.id)}
                for d in self.demands
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PrimaryRouting":
        demands, paths = [], {}
        for e in doc["demands"]:
            d = Demand(int(e["id"]), e["src"], e["dst"], float(e["bandwidth"]))
            demands.append(d)
            nodes = e["path"]
            paths[d.id] = tuple(zip(nodes[:-1], nodes[1:]))
        return cls(tuple(demands), paths, float(doc["w_cap"]))


def lex_shortest_path(successors: dict[str, list[str]], src: str, dst: str, allowed) -> list[str] | None:
    """Min-hop path using arcs for which ``allowed(arc)`` holds.

    Among equal-hop paths returns the lexicographically smallest node sequence.
    """
    pred: dict[str, list[str]] = {n: [] for n in successors}
    for i, outs in successors.items():
        for j in outs:
            if allowed((i, j)):
                pred[j].append(i)
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        j = queue.popleft()
        for i in pred[j]:
            if i not in dist:
                dist[i] = dist[j] + 1
                queue.append(i)
    if src not in dist:
        return None
    path = [src]
    while path[-1] != dst:
        here = path[-1]
        path.append(min(j for j in successors[here] if allowed((here, j)) and dist.get(j) == dist[here] - 1))
    return path


def route_primary(topology: Topology, demands: list[Demand], w_cap: float = 0.8) -> PrimaryRouting:
    """Greedy sequential routing in demand-id order over residual capacity."""
    if not 0 < w_cap <= 1:
        raise RoutingError(f"w_cap must lie in (0, 1], got {w_cap}")
    residual = {a: w_cap * c for a, c in topology.capacity.items()}
    paths: dict[int, tuple[Arc, ...]] = {}
    for d in sorted(demands, key=lambda d: d.id):
        nodes = lex_shortest_path(topology.successors, d.src, d.dst, lambda a: residual[a] >= d.bandwidth - EPS)
        if nodes is None:
            raise RoutingInfeasible(d)
        arcs = tuple(zip(nodes[:-1], nodes[1:]))
        for a in arcs:
            residual[a] -= d.bandwidth
        paths[d.id] = arcs
    routing = PrimaryRouting(tuple(sorted(demands, key=lambda d: d.id)), paths, w_cap)
    routing.check(topology)
    return routing


def dump_routing(routing: PrimaryRouting) -> str:
    return json.dumps(routing.to_json(), indent=1, sort_keys=True)


def load_routing(text: str) -> PrimaryRouting:
    return PrimaryRouting.from_json(json.loads(text))
