"""Backup length, link occupation and reverse path metrics, aggregated per run."""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field

from .plans import BackupPlan
from .routing import PrimaryRouting
from .scenarios import ScenarioData
from .topology import Arc

METRICS = ("backup_length", "occupation", "reverse_path")
STATS = ("min", "max", "avg", "sd")

REPORT_NOTE = (
    "Percentages. sd is the population standard deviation in percentage points. "
    "backup_length and reverse_path aggregate over (demand, event) pairs; reverse_path "
    "skips pairs detected at the source (lambda = 0). occupation aggregates over arcs, "
    "each arc taking its worst case over the failure-free state and every link and node "
    "reading of every failure event."
)


@dataclass(frozen=True)
class Summary:
    min: float
    max: float
    avg: float
    sd: float
    count: int

    @classmethod
    def of(cls, values) -> "Summary | None":
        values = list(values)
        if not values:
            return None
        return cls(min(values), max(values), statistics.fmean(values), statistics.pstdev(values), len(values))


@dataclass
class MetricsReport:
    instance: str
    model: str
    status: str
    backup_length: Summary | None = None
    occupation: Summary | None = None
    reverse_path: Summary | None = None
    per_pair: list[dict] = field(default_factory=list)
    per_arc: dict[Arc, float] = field(default_factory=dict)

    def row(self) -> dict:
        out = {"instance": self.instance, "model": self.model, "status": self.status}
        for metric in METRICS:
            s = getattr(self, metric)
            for stat in STATS:
                out[f"{metric}_{stat}"] = "" if s is None else f"{getattr(s, stat):.2f}"
        return out

    def to_json(self) -> dict:
        doc = {"note": REPORT_NOTE, **self.row()}
        for metric in METRICS:
            s = getattr(self, metric)
            doc[metric] = None if s is None else {k: round(getattr(s, k), 6) for k in (*STATS, "count")}
        doc["per_pair"] = [{k: round(v, 6) if isinstance(v, float) else v for k, v in p.items()} for p in self.per_pair]
        return doc


def backup_length_pct(backup_hops: int, primary_hops: int) -> float:
    return (backup_hops - primary_hops) / primary_hops * 100.0


def reverse_pct(backward_hops: int, lam: int) -> float:
    return backward_hops / lam * 100.0 if lam > 0 else 0.0


def scenario_loads(sc: ScenarioData, plan: BackupPlan):
    """Yield ``(label, {arc: load})`` for the failure-free state and every failure reading.

    Each demand counts once per scenario: the primary load of demands hit by the
    scenario is excluded and their backups are added instead.
    """
    routing = sc.routing
    yield "normal", dict(routing.load)
    for f in sc.events:
        load = dict(sc.u[f])
        for g in (f, f.reverse):
            for d in sc.affected_or_empty(g):
                for a in plan.routes[(g, d)].path:
                    load[a] = load.get(a, 0.0) + routing.by_id[d].bandwidth
        yield f"link {f.n}->{f.m}", load
    for m in sc.topology.nodes:
        hit = [(g, d) for g in sc.events if g.m == m for d in sc.affected[g]]
        if not hit:
            continue
        load = dict(sc.v[m])
        for g, d in hit:
            for a in plan.routes[(g, d)].path:
                load[a] = load.get(a, 0.0) + routing.by_id[d].bandwidth
        yield f"node {m}", load


def arc_occupation(sc: ScenarioData, plan: BackupPlan) -> dict[Arc, float]:
    """Worst-case allocated share of each arc's capacity, in percent."""
    worst = {a: 0.0 for a in sc.topology.arcs}
    for _, load in scenario_loads(sc, plan):
        for a, x in load.items():
            worst[a] = max(worst[a], x)
    return {a: worst[a] / sc.topology.capacity[a] * 100.0 for a in sc.topology.arcs}


def compute_metrics(routing: PrimaryRouting, sc: ScenarioData, plan: BackupPlan, instance: str = "") -> MetricsReport:
    pairs = []
    for f, d in sc.pairs():
        r = plan.routes[(f, d)]
        lam = sc.lam[(f, d)]
        pairs.append({
            "demand": d,
            "event": f.label(),
            "lambda": lam,
            "primary_hops": routing.hops(d),
            "backup_hops": len(r.path),
            "backward_hops": r.backward_hops,
            "backup_length": backup_length_pct(len(r.path), routing.hops(d)),
            "reverse_path": reverse_pct(r.backward_hops, lam),
        })
    occ = arc_occupation(sc, plan)
    return MetricsReport(
        instance or sc.topology.name,
        plan.model,
        plan.status,
        Summary.of(p["backup_length"] for p in pairs),
        Summary.of(occ.values()),
        Summary.of(p["reverse_path"] for p in pairs if p["lambda"] > 0),
        pairs,
        occ,
    )


def empty_report(instance: str, model: str, status: str) -> MetricsReport:
    return MetricsReport(instance, model, status)


def _columns():
    return ["instance", "model", "status"] + [f"{m}_{s}" for m in METRICS for s in STATS]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_columns(), lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps({"note": REPORT_NOTE, "runs": [r.to_json() for r in reports]}, indent=1)


def occupation_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    buf.write("src,dst,occupation_pct\n")
    for (i, j), x in sorted(report.per_arc.items()):
        buf.write(f"{i},{j},{x:.4f}\n")
    return buf.getvalue()
