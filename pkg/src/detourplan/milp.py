"""Solver-neutral MILP instances for backup-path planning.

Three formulations share one in-memory model type:

* ``bp``  per-(event, demand) backup paths, weighted reverse-hop / length / sharing objective
* ``ca``  same path system, piecewise-linear congestion cost on worst-case arc load
* ``e2e`` one node-disjoint backup per demand, activated at the source
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field

from .scenarios import FailureEvent, ScenarioData
from .topology import Arc

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"

LE, GE, EQ = "<=", ">=", "="

# Piecewise-linear load cost: phi >= slope * load / (w_cap * c) + intercept.
COST_SLOPES = (1.0, 3.0, 10.0, 70.0, 500.0)
COST_INTERCEPTS = (0.0, -2.0 / 3.0, -16.0 / 3.0, -178.0 / 3.0, -1468.0 / 3.0)

BP_WEIGHTS = {
    "bp111": (1.0, 1.0, 1.0),
    "bp100": (1.0, 0.0, 0.0),
    "bp010": (0.0, 1.0, 0.0),
    "bp001": (0.0, 0.0, 1.0),
}
VARIANTS = tuple(BP_WEIGHTS) + ("ca", "e2e")


def load_cost(normalized_load: float) -> float:
    """Value of the linearized cost curve at ``mu / (w_cap * c)``."""
    return max(s * normalized_load + b for s, b in zip(COST_SLOPES, COST_INTERCEPTS))


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    w_cap: float = 0.8
    w_h: float = 0.0
    w_y: float = 0.0
    w_z: float = 0.0
    # None: add potential-based subtour elimination exactly when w_h > 0.
    subtour_elimination: bool | None = None

    def __post_init__(self):
        if self.variant not in ("bp", "ca", "e2e"):
            raise ValueError(f"unknown model variant {self.variant!r}")
        if not 0 < self.w_cap <= 1:
            raise ValueError(f"w_cap must lie in (0, 1], got {self.w_cap}")
        if min(self.w_h, self.w_y, self.w_z) < 0:
            raise ValueError("objective weights must be non-negative")
        if self.variant == "bp" and max(self.w_h, self.w_y, self.w_z) <= 0:
            raise ValueError("BP needs at least one positive weight")

    @classmethod
    def named(cls, name: str, w_cap: float = 0.8, **kw) -> "ModelSpec":
        key = name.lower().replace("_", "")
        if key in BP_WEIGHTS:
            w_h, w_y, w_z = BP_WEIGHTS[key]
            return cls("bp", w_cap, w_h, w_y, w_z, **kw)
        if key in ("ca", "bpca"):
            return cls("ca", w_cap, **kw)
        if key == "e2e":
            return cls("e2e", w_cap, **kw)
        raise ValueError(f"unknown model name {name!r}; expected one of {VARIANTS}")

    @property
    def label(self) -> str:
        if self.variant == "bp":
            return "bp" + "".join(f"{w:g}" for w in (self.w_h, self.w_y, self.w_z))
        return self.variant

    @property
    def uses_potentials(self) -> bool:
        if self.variant != "bp":
            return False
        if self.subtour_elimination is None:
            return self.w_h > 0
        return self.subtour_elimination


@dataclass
class Variable:
    name: str
    kind: str
    lb: float = 0.0
    ub: float = float("inf")

    @property
    def is_integral(self) -> bool:
        return self.kind in (BINARY, INTEGER)


@dataclass
class Constraint:
    """``constant + sum(coeffs[k] * x[k])  (sense)  rhs``."""

    name: str
    family: str
    coeffs: dict[int, float]
    sense: str
    rhs: float
    constant: float = 0.0


@dataclass
class MilpInstance:
    name: str
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: list[tuple[int, float]] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)
    # Decoding aids: variable indices grouped by role.
    y: dict[tuple[FailureEvent, int], list[int]] = field(default_factory=dict)
    h: dict[tuple[FailureEvent, int], int] = field(default_factory=dict)
    z: dict[int, list[int]] = field(default_factory=dict)
    x: dict[int, list[int]] = field(default_factory=dict)
    mu: list[int] = field(default_factory=list)
    phi: list[int] = field(default_factory=list)
    spec: ModelSpec | None = None

    def add_var(self, name: str, kind: str, lb: float = 0.0, ub: float | None = None) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        if ub is None:
            ub = 1.0 if kind == BINARY else float("inf")
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        return self.index[name]

    def add_row(self, name, family, coeffs, sense, rhs, constant=0.0):
        self.constraints.append(Constraint(name, family, coeffs, sense, rhs, constant))

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.family] = out.get(c.family, 0) + 1
        return out

    def objective_coeffs(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for k, c in self.objective:
            out[k] = out.get(k, 0.0) + c
        return out

    def objective_value(self, values) -> float:
        return sum(c * values[k] for k, c in self.objective)

    def check_references(self):
        n = len(self.variables)
        for c in self.constraints:
            bad = [k for k in c.coeffs if not 0 <= k < n]
            if bad:
                raise ValueError(f"row {c.name} references undeclared variables {bad}")
        if any(not 0 <= k < n for k, _ in self.objective):
            raise ValueError("objective references undeclared variables")


def _arc_tag(arc: Arc) -> str:
    return f"{arc[0]},{arc[1]}"


def _declare_paths(inst: MilpInstance, sc: ScenarioData):
    arcs = sc.topology.arcs
    for f, d in sc.pairs():
        inst.y[(f, d)] = [inst.add_var(f"y[{d},{f.n},{f.m},{_arc_tag(a)}]", BINARY) for a in arcs]


def _availability_rows(inst: MilpInstance, sc: ScenarioData):
    idx = sc.topology.arc_index
    for f in sc.events:
        for d in sc.d1[f]:
            ys = inst.y[(f, d)]
            inst.add_row(f"avail_node[{d},{f.n},{f.m}]", "link_availability_node",
                         {ys[idx[a]]: 1.0 for a in sc.incident[f.m]}, LE, 0.0)
        for d in sc.d2[f]:
            ys = inst.y[(f, d)]
            inst.add_row(f"avail_link[{d},{f.n},{f.m}]", "link_availability_link",
                         {ys[idx[(f.n, f.m)]]: 1.0, ys[idx[(f.m, f.n)]]: 1.0}, LE, 0.0)


def _flow_rows(inst: MilpInstance, sc: ScenarioData, keys, cycle_avoidance: bool):
    """Flow conservation (and optionally out-degree <= 1) for each y-path system in ``keys``."""
    topo = sc.topology
    out_arcs = {n: [] for n in topo.nodes}
    in_arcs = {n: [] for n in topo.nodes}
    for k, (i, j) in enumerate(topo.arcs):
        out_arcs[i].append(k)
        in_arcs[j].append(k)
    for key, (src, dst), ys, tag in keys:
        for i in topo.nodes:
            coeffs = {ys[k]: 1.0 for k in out_arcs[i]}
            for k in in_arcs[i]:
                coeffs[ys[k]] = -1.0
            rhs = 1.0 if i == src else (-1.0 if i == dst else 0.0)
            inst.add_row(f"flow[{tag},{i}]", "flow_conservation", coeffs, EQ, rhs)
            if cycle_avoidance:
                inst.add_row(f"outdeg[{tag},{i}]", "cycle_avoidance", {ys[k]: 1.0 for k in out_arcs[i]}, LE, 1.0)


def _pair_keys(inst: MilpInstance, sc: ScenarioData):
    for f, d in sc.pairs():
        dem = sc.routing.by_id[d]
        yield (f, d), (dem.src, dem.dst), inst.y[(f, d)], f"{d},{f.n},{f.m}"


def _capacity_rows(inst: MilpInstance, sc: ScenarioData, spec: ModelSpec, arc_bound, ykey, family_suffix=""):
    """Worst-case load rows for link-failure and node-failure readings of each event.

    ``arc_bound(k)`` returns ``(extra_coeffs, rhs)`` for arc ``k``; ``ykey(f, d)`` gives the
    variable list carrying demand ``d``'s backup under event ``f``.
    """
    topo = sc.topology
    routing = sc.routing
    arcs = topo.arcs
    for f in sc.events:
        group = [(g, d) for g in (f, f.reverse) for d in sc.affected_or_empty(g)]
        for k, a in enumerate(arcs):
            coeffs: dict[int, float] = {}
            for g, d in group:
                var = ykey(g, d)[k]
                coeffs[var] = coeffs.get(var, 0.0) + routing.by_id[d].bandwidth
            extra, rhs = arc_bound(k)
            coeffs.update(extra)
            inst.add_row(f"cap_link[{f.n},{f.m},{_arc_tag(a)}]", "capacity_link" + family_suffix,
                         coeffs, LE, rhs, sc.u[f].get(a, 0.0))
    for m in topo.nodes:
        group = [(g, d) for g in sc.events if g.m == m for d in sc.affected[g]]
        if not group:
            continue
        for k, a in enumerate(arcs):
            coeffs = {}
            for g, d in group:
                var = ykey(g, d)[k]
                coeffs[var] = coeffs.get(var, 0.0) + routing.by_id[d].bandwidth
            extra, rhs = arc_bound(k)
            coeffs.update(extra)
            inst.add_row(f"cap_node[{m},{_arc_tag(a)}]", "capacity_node" + family_suffix,
                         coeffs, LE, rhs, sc.v[m].get(a, 0.0))


def build_bp(sc: ScenarioData, spec: ModelSpec) -> MilpInstance:
    if spec.variant != "bp":
        raise ValueError("build_bp needs a BP model spec")
    topo, routing = sc.topology, sc.routing
    arcs = topo.arcs
    inst = MilpInstance(f"{topo.name}-{spec.label}", spec=spec)
    _declare_paths(inst, sc)
    for f, d in sc.pairs():
        lam = sc.lam[(f, d)]
        inst.h[(f, d)] = inst.add_var(f"h[{d},{f.n},{f.m}]", INTEGER, 0.0, float(lam))
    for dem in routing.demands:
        inst.z[dem.id] = [inst.add_var(f"z[{dem.id},{_arc_tag(a)}]", BINARY) for a in arcs]

    for f, d in sc.pairs():
        inst.objective.append((inst.h[(f, d)], spec.w_h))
    for f, d in sc.pairs():
        inst.objective.extend((v, spec.w_y) for v in inst.y[(f, d)])
    for dem in routing.demands:
        inst.objective.extend((v, spec.w_z * routing.beta(dem.id, a)) for v, a in zip(inst.z[dem.id], arcs))

    _availability_rows(inst, sc)
    cap = [spec.w_cap * topo.capacity[a] for a in arcs]
    _capacity_rows(inst, sc, spec, lambda k: ({}, cap[k]), lambda g, d: inst.y[(g, d)])
    _flow_rows(inst, sc, _pair_keys(inst, sc), cycle_avoidance=True)

    idx = topo.arc_index
    for f, d in sc.pairs():
        lam = sc.lam[(f, d)]
        if lam == 0:
            continue
        ys = inst.y[(f, d)]
        prefix = routing.paths[d][:lam]
        coeffs = {ys[idx[a]]: -1.0 for a in prefix}
        coeffs[inst.h[(f, d)]] = -1.0
        inst.add_row(f"reverse[{d},{f.n},{f.m}]", "reverse_path", coeffs, LE, 0.0, float(lam))

    for f, d in sc.pairs():
        ys = inst.y[(f, d)]
        zs = inst.z[d]
        for k, a in enumerate(arcs):
            inst.add_row(f"capuse[{d},{f.n},{f.m},{_arc_tag(a)}]", "capacity_use", {zs[k]: 1.0, ys[k]: -1.0}, GE, 0.0)

    if spec.uses_potentials:
        _potential_rows(inst, sc)
    inst.check_references()
    return inst


def _potential_rows(inst: MilpInstance, sc: ScenarioData):
    """Forbid y-circulations detached from the s-t path.

    Out-degree <= 1 plus flow conservation still admit a path together with
    disjoint cycles; a cycle through primary-prefix arcs lowers the reverse-hop
    lower bound without any real backtracking. Node potentials increasing by at
    least one along every selected arc rule out every cycle.
    """
    topo = sc.topology
    big = float(len(topo.nodes))
    for f, d in sc.pairs():
        dem = sc.routing.by_id[d]
        pot = {i: inst.add_var(f"o[{d},{f.n},{f.m},{i}]", CONTINUOUS, 0.0, big - 1.0) for i in topo.nodes}
        ys = inst.y[(f, d)]
        for k, (i, j) in enumerate(topo.arcs):
            if j == dem.src:
                continue
            # o_j - o_i - N*y_ij >= 1 - N
            inst.add_row(f"order[{d},{f.n},{f.m},{i},{j}]", "subtour_elimination",
                         {pot[j]: 1.0, pot[i]: -1.0, ys[k]: -big}, GE, 1.0 - big)


def build_ca(sc: ScenarioData, spec: ModelSpec | None = None) -> MilpInstance:
    spec = spec or ModelSpec("ca")
    if spec.variant != "ca":
        raise ValueError("build_ca needs a CA model spec")
    topo = sc.topology
    arcs = topo.arcs
    inst = MilpInstance(f"{topo.name}-ca", spec=spec)
    _declare_paths(inst, sc)
    inst.mu = [inst.add_var(f"mu[{_arc_tag(a)}]", CONTINUOUS) for a in arcs]
    inst.phi = [inst.add_var(f"phi[{_arc_tag(a)}]", CONTINUOUS) for a in arcs]
    inst.objective.extend((v, 1.0) for v in inst.phi)

    _availability_rows(inst, sc)
    _flow_rows(inst, sc, _pair_keys(inst, sc), cycle_avoidance=False)
    _capacity_rows(inst, sc, spec, lambda k: ({inst.mu[k]: -1.0}, 0.0), lambda g, d: inst.y[(g, d)])
    for k, a in enumerate(arcs):
        cap = spec.w_cap * topo.capacity[a]
        inst.add_row(f"mu_cap[{_arc_tag(a)}]", "max_load", {inst.mu[k]: 1.0}, LE, cap)
        for q, (slope, icpt) in enumerate(zip(COST_SLOPES, COST_INTERCEPTS)):
            inst.add_row(f"cost{q + 1}[{_arc_tag(a)}]", "load_cost",
                         {inst.phi[k]: 1.0, inst.mu[k]: -slope / cap}, GE, icpt)
    inst.check_references()
    return inst


def build_e2e(sc: ScenarioData, spec: ModelSpec | None = None) -> MilpInstance:
    """Classic end-to-end protection on the fixed primaries.

    One backup per demand, node-disjoint from its primary except at the end
    points; it carries the demand under every event that hits the primary.
    """
    spec = spec or ModelSpec("e2e")
    if spec.variant != "e2e":
        raise ValueError("build_e2e needs an E2E model spec")
    topo, routing = sc.topology, sc.routing
    arcs = topo.arcs
    idx = topo.arc_index
    inst = MilpInstance(f"{topo.name}-e2e", spec=spec)
    for dem in routing.demands:
        inst.x[dem.id] = [inst.add_var(f"x[{dem.id},{_arc_tag(a)}]", BINARY) for a in arcs]
        inst.objective.extend((v, 1.0) for v in inst.x[dem.id])

    for dem in routing.demands:
        xs = inst.x[dem.id]
        interior = routing.nodes(dem.id)[1:-1]
        banned = {a for n in interior for a in topo.incident_arcs(n)}
        banned |= {(dem.src, dem.dst), (dem.dst, dem.src)} & set(arcs)
        inst.add_row(f"disjoint[{dem.id}]", "disjointness", {xs[idx[a]]: 1.0 for a in sorted(banned)}, LE, 0.0)

    keys = ((d.id, (d.src, d.dst), inst.x[d.id], str(d.id)) for d in routing.demands)
    _flow_rows(inst, sc, keys, cycle_avoidance=True)
    cap = [spec.w_cap * topo.capacity[a] for a in arcs]
    _capacity_rows(inst, sc, spec, lambda k: ({}, cap[k]), lambda g, d: inst.x[d])
    inst.check_references()
    return inst


def build(sc: ScenarioData, spec: ModelSpec) -> MilpInstance:
    if spec.variant == "bp":
        return build_bp(sc, spec)
    if spec.variant == "ca":
        return build_ca(sc, spec)
    return build_e2e(sc, spec)


_LP_BAD = re.compile(r"[^A-Za-z0-9_.,(){}!\"#$%&/;?@`'|~]")


def lp_name(name: str) -> str:
    name = name.replace("[", "(").replace("]", ")")
    return _LP_BAD.sub("_", name)


def _lp_terms(coeffs, names, width=6):
    parts = []
    for k, c in coeffs:
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c):.12g} {names[k]}")
    lines = [" ".join(parts[s:s + width]) for s in range(0, len(parts), width)]
    return "\n   ".join(lines) if lines else "0 " + names[0]


def write_lp(inst: MilpInstance, stream: io.TextIOBase | None = None) -> str:
    """CPLEX LP-format text. Constant row terms are moved to the right-hand side."""
    names = [lp_name(v.name) for v in inst.variables]
    out = io.StringIO()
    out.write(f"\\ {inst.name}\nMinimize\n obj: ")
    obj = sorted(inst.objective_coeffs().items())
    out.write(_lp_terms(obj, names) + "\nSubject To\n")
    for row in inst.constraints:
        terms = sorted(row.coeffs.items())
        if not terms:
            continue
        rhs = row.rhs - row.constant
        out.write(f" {lp_name(row.name)}: {_lp_terms(terms, names)} {row.sense} {rhs:.12g}\n")
    out.write("Bounds\n")
    for v, nm in zip(inst.variables, names):
        if v.kind == BINARY:
            continue
        ub = "+inf" if v.ub == float("inf") else f"{v.ub:.12g}"
        out.write(f" {v.lb:.12g} <= {nm} <= {ub}\n")
    gens = [nm for v, nm in zip(inst.variables, names) if v.kind == INTEGER]
    bins = [nm for v, nm in zip(inst.variables, names) if v.kind == BINARY]
    if gens:
        out.write("General\n" + "".join(f" {nm}\n" for nm in gens))
    if bins:
        out.write("Binary\n" + "".join(f" {nm}\n" for nm in bins))
    out.write("End\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text
