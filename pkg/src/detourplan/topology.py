"""Network graphs: symmetric directed topologies with per-arc capacity and edge/core roles."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable

Arc = tuple[str, str]

EDGE = "edge"
CORE = "core"
ROLES = (EDGE, CORE)

BUNDLED = ("polska", "norway")


class TopologyError(ValueError):
    pass


class TopologyParseError(TopologyError):
    def __init__(self, message, line=None, column=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)
        self.line = line
        self.column = column
        self.field = field


class AsymmetryError(TopologyError):
    pass


class CapacityError(TopologyError):
    pass


@dataclass(frozen=True)
class Topology:
    """Symmetric directed graph. Read-only after construction."""

    name: str
    roles: dict[str, str]
    capacity: dict[Arc, float]
    nodes: tuple[str, ...] = field(init=False)
    arcs: tuple[Arc, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.roles))
        object.__setattr__(self, "arcs", tuple(sorted(self.capacity)))
        self._validate()

    def _validate(self):
        for node, role in self.roles.items():
            if role not in ROLES:
                raise TopologyError(f"node {node!r}: unknown role {role!r}")
        for (i, j), c in self.capacity.items():
            if i == j:
                raise TopologyError(f"self-loop on {i!r}")
            if i not in self.roles or j not in self.roles:
                raise TopologyError(f"arc ({i}, {j}) references an unknown node")
            if not (isinstance(c, (int, float)) and math.isfinite(c) and c > 0):
                raise CapacityError(f"arc ({i}, {j}) has invalid capacity {c!r}")
            if (j, i) not in self.capacity:
                raise AsymmetryError(f"arc ({i}, {j}) has no reverse arc ({j}, {i})")

    @property
    def edge_nodes(self) -> list[str]:
        return [n for n in self.nodes if self.roles[n] == EDGE]

    @property
    def core_nodes(self) -> list[str]:
        return [n for n in self.nodes if self.roles[n] == CORE]

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        out = {n: [] for n in self.nodes}
        for i, j in self.arcs:
            out[i].append(j)
        return {n: sorted(v) for n, v in out.items()}

    @cached_property
    def arc_index(self) -> dict[Arc, int]:
        return {a: k for k, a in enumerate(self.arcs)}

    def incident_arcs(self, node: str) -> list[Arc]:
        """All arcs entering or leaving ``node`` (the set L^m)."""
        return [a for a in self.arcs if node in a]

    def with_uniform_capacity(self, c: float) -> "Topology":
        return Topology(self.name, dict(self.roles), {a: c for a in self.arcs})

    def summary(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "arcs": len(self.arcs),
            "edge": len(self.edge_nodes),
            "core": len(self.core_nodes),
        }

    def to_json(self) -> dict:
        """Serialize using directed ``arcs`` entries so per-arc capacities round-trip."""
        return {
            "name": self.name,
            "nodes": [{"id": n, "role": self.roles[n]} for n in self.nodes],
            "arcs": [{"src": i, "dst": j, "capacity": self.capacity[(i, j)]} for i, j in self.arcs],
        }


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise TopologyParseError(f"missing key {key!r}", field=where)
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise TopologyParseError(f"expected {getattr(kind, '__name__', kind)} for {key!r}", field=f"{where}.{key}")
    return val


def _number(val, where):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise TopologyParseError(f"capacity must be a number, got {val!r}", field=where)
    if not math.isfinite(val) or val <= 0:
        raise CapacityError(f"non-positive or non-finite capacity {val!r} at {where}")
    return float(val)


def load_topology(source: str | dict, default_capacity: float | None = None) -> Topology:
    """Parse a topology document.

    ``links`` entries are undirected and expand into both arcs with equal
    capacity. ``arcs`` entries are directed and must come in reverse pairs.
    Entries without a capacity fall back to ``default_capacity``.
    """
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise TopologyParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise TopologyParseError("top-level value must be an object")

    name = doc.get("name", "topology")
    roles: dict[str, str] = {}
    for k, entry in enumerate(_require(doc, "nodes", "$", list)):
        where = f"nodes[{k}]"
        nid = str(_require(entry, "id", where))
        role = _require(entry, "role", where, str)
        if role not in ROLES:
            raise TopologyParseError(f"role must be one of {ROLES}, got {role!r}", field=f"{where}.role")
        if nid in roles:
            raise TopologyParseError(f"duplicate node id {nid!r}", field=where)
        roles[nid] = role

    def cap_of(entry, where):
        if "capacity" in entry:
            return _number(entry["capacity"], f"{where}.capacity")
        if default_capacity is None:
            raise TopologyParseError("missing capacity and no default supplied", field=where)
        return _number(default_capacity, "default_capacity")

    capacity: dict[Arc, float] = {}

    def add(i, j, c, where):
        for end in (i, j):
            if end not in roles:
                raise TopologyParseError(f"unknown node {end!r}", field=where)
        if i == j:
            raise TopologyParseError(f"self-loop on {i!r}", field=where)
        if (i, j) in capacity:
            raise TopologyParseError(f"duplicate arc ({i}, {j})", field=where)
        capacity[(i, j)] = c

    for k, entry in enumerate(doc.get("links", [])):
        where = f"links[{k}]"
        a, b = str(_require(entry, "a", where)), str(_require(entry, "b", where))
        c = cap_of(entry, where)
        add(a, b, c, where)
        add(b, a, c, where)
    for k, entry in enumerate(doc.get("arcs", [])):
        where = f"arcs[{k}]"
        add(str(_require(entry, "src", where)), str(_require(entry, "dst", where)), cap_of(entry, where), where)

    if not capacity:
        raise TopologyParseError("topology has no links or arcs")
    return Topology(str(name), roles, capacity)


def read_topology(path: str | Path, default_capacity: float | None = None) -> Topology:
    return load_topology(Path(path).read_text(), default_capacity)


def bundled_topology(name: str, capacity: float = 1.0) -> Topology:
    """Load one of the shipped SNDlib instances (connectivity only) with uniform capacity."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled topology {name!r}; choose from {BUNDLED}")
    text = resources.files("detourplan").joinpath(f"data/{name}.json").read_text()
    return load_topology(text, default_capacity=capacity)


def generate_fat_tree(k: int, edge_capacity: float) -> Topology:
    """k-ary fat-tree switch fabric (no hosts).

    Core switch ``c{g}_{j}`` connects to aggregation switch ``a{p}_{g}`` of
    every pod ``p``; inside a pod every aggregation switch connects to every
    edge switch ``e{p}_{x}``.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 2 or k % 2:
        raise TopologyError(f"fat-tree arity must be an even integer >= 2, got {k!r}")
    half = k // 2
    roles: dict[str, str] = {}
    links: list[Arc] = []
    for g in range(half):
        for j in range(half):
            roles[f"c{g}_{j}"] = CORE
    for p in range(k):
        for g in range(half):
            roles[f"a{p}_{g}"] = CORE
        for x in range(half):
            roles[f"e{p}_{x}"] = EDGE
        for g in range(half):
            for j in range(half):
                links.append((f"c{g}_{j}", f"a{p}_{g}"))
            for x in range(half):
                links.append((f"a{p}_{g}", f"e{p}_{x}"))
    capacity = {}
    for a, b in links:
        capacity[(a, b)] = edge_capacity
        capacity[(b, a)] = edge_capacity
    return Topology(f"fat-tree-k{k}", roles, capacity)


def resolve_topology(spec: str, capacity: float) -> Topology:
    """CLI-style selector: ``fat-tree:K``, a bundled name, or a file path.

    For files, ``capacity`` only fills in links that declare none.
    """
    if spec.startswith("fat-tree:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise TopologyError(f"bad fat-tree selector {spec!r}") from None
        return generate_fat_tree(k, capacity)
    if spec in BUNDLED:
        return bundled_topology(spec, capacity)
    return read_topology(spec, default_capacity=capacity)


def arcs_to_nodes(path: Iterable[Arc]) -> list[str]:
    path = list(path)
    if not path:
        return []
    return [path[0][0]] + [j for _, j in path]


def nodes_to_arcs(nodes: Iterable[str]) -> list[Arc]:
    nodes = list(nodes)
    return list(zip(nodes[:-1], nodes[1:]))
