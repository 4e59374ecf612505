"""Experiment configuration and the plan-solve-measure pipeline behind the CLI."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .metrics import compute_metrics, empty_report, occupation_csv, reports_to_csv, MetricsReport
from .milp import VARIANTS, ModelSpec, build, write_lp
from .plans import check_plan, extract_plan, plan_to_json
from .routing import build_demands, route_primary, RoutingInfeasible
from .scenarios import build_scenarios
from .solver import ERROR, INFEASIBLE, OPTIMAL, TIME_LIMIT, SolveLimits, solve
from .topology import resolve_topology

log = logging.getLogger(__name__)

# Uniform capacities: smallest feasible value and the over-provisioned regime.
PRESETS = {
    "polska": (14.0, 100.0),
    "norway": (30.0, 300.0),
    "fat-tree:4": (13.0, 100.0),
}

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INFEASIBLE = 2
EXIT_ERROR = 3
EXIT_TIME_LIMIT = 4


@dataclass
class ExperimentConfig:
    topology: str
    capacities: list[float]
    bandwidth: float = 1.0
    w_cap: float = 0.8
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    solver: str = "highs"
    time_limit: float | None = None
    gap: float = 0.0
    out: str = "runs"
    write_lp: bool = False

    def __post_init__(self):
        if not self.variants:
            raise ValueError("at least one model variant is required")
        for v in self.variants:
            ModelSpec.named(v, self.w_cap)
        if not self.capacities:
            if self.topology not in PRESETS:
                raise ValueError(f"no capacity given and no preset for {self.topology!r}")
            self.capacities = list(PRESETS[self.topology])
        if not (self.topology.startswith("fat-tree:") or self.topology in PRESETS or Path(self.topology).exists()):
            raise FileNotFoundError(f"topology file {self.topology!r} does not exist")

    @classmethod
    def from_json(cls, doc: dict) -> list["ExperimentConfig"]:
        """A matrix file holds either one run or ``{"runs": [...], **shared}``."""
        runs = doc.get("runs")
        if runs is None:
            return [cls._one(doc)]
        shared = {k: v for k, v in doc.items() if k != "runs"}
        return [cls._one({**shared, **r}) for r in runs]

    @classmethod
    def _one(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "capacity" in d:
            d["capacities"] = [d.pop("capacity")]
        d.setdefault("capacities", [])
        return cls(**d)


def instance_label(topology: str, capacity: float) -> str:
    base = Path(topology).stem if topology.endswith(".json") else topology.replace(":", "")
    return f"{base}-c{capacity:g}"


@dataclass
class VariantOutcome:
    variant: str
    status: str
    report: MetricsReport
    wall_time: float = 0.0
    message: str = ""
    assignment: dict[str, float] = field(default_factory=dict, repr=False)


# Solve order inside an instance. Every BP weighting shares one feasible region,
# so an earlier answer is a valid start for the next one.
SOLVE_ORDER = ("bp111", "bp010", "bp001", "bp100", "ca", "e2e")


def solve_variant(topology, routing, sc, variant: str, config: ExperimentConfig, instance: str, outdir: Path | None,
                  start: dict[str, float] | None = None):
    spec = ModelSpec.named(variant, config.w_cap)
    inst = build(sc, spec)
    if outdir is not None and config.write_lp:
        (outdir / "model.lp").write_text(write_lp(inst))
    result = solve(inst, SolveLimits(config.time_limit, config.gap), backend=config.solver, start=start)
    plan = None
    report = empty_report(instance, spec.label, result.status)
    message = result.message
    if result.status in (OPTIMAL, TIME_LIMIT) and result.values is not None:
        plan = extract_plan(sc, inst, result)
        plan.status = result.status
        problems = check_plan(sc, plan)
        if problems:
            message = f"plan check failed: {problems[:3]}"
            result.status = ERROR
            plan.status = ERROR
            report = empty_report(instance, spec.label, ERROR)
        else:
            report = compute_metrics(routing, sc, plan, instance)
    if outdir is not None:
        extra = {"instance": instance, "solver": config.solver, "message": message,
                 "spurious_pairs": plan.spurious_cycles if plan else 0}
        doc = plan_to_json(topology, routing, plan, spec.label, result.status, result.objective, extra)
        (outdir / "plan.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        (outdir / "metrics.json").write_text(json.dumps(report.to_json(), indent=1) + "\n")
        if report.per_arc:
            (outdir / "occupation.csv").write_text(occupation_csv(report))
    keep = result.assignment(inst) if result.status in (OPTIMAL, TIME_LIMIT) else {}
    return VariantOutcome(spec.label, result.status, report, result.wall_time, message, keep)


def run_instance(config: ExperimentConfig, capacity: float, out_root: Path | None = None) -> list[VariantOutcome]:
    topology = resolve_topology(config.topology, capacity)
    instance = instance_label(config.topology, capacity)
    base = None
    if out_root is not None:
        base = out_root / instance
        base.mkdir(parents=True, exist_ok=True)
    demands = build_demands(topology, config.bandwidth)
    try:
        routing = route_primary(topology, demands, config.w_cap)
    except RoutingInfeasible as exc:
        log.error("%s: %s", instance, exc)
        outcomes = [VariantOutcome(ModelSpec.named(v, config.w_cap).label, INFEASIBLE,
                                   empty_report(instance, ModelSpec.named(v, config.w_cap).label, INFEASIBLE),
                                   message=str(exc)) for v in config.variants]
        if base is not None:
            (base / "metrics.csv").write_text(reports_to_csv(o.report for o in outcomes))
        return outcomes
    sc = build_scenarios(topology, routing)
    labels = [ModelSpec.named(v, config.w_cap).label for v in config.variants]
    order = sorted(range(len(labels)), key=lambda k: SOLVE_ORDER.index(labels[k]))
    done, start = {}, {}
    for k in order:
        vdir = None
        if base is not None:
            vdir = base / labels[k]
            vdir.mkdir(exist_ok=True)
        o = solve_variant(topology, routing, sc, config.variants[k], config, instance, vdir, start)
        start.update(o.assignment)
        done[k] = o
    outcomes = [done[k] for k in range(len(labels))]
    if base is not None:
        (base / "metrics.csv").write_text(reports_to_csv(o.report for o in outcomes))
    return outcomes


def run_experiment(config: ExperimentConfig) -> tuple[int, list[VariantOutcome]]:
    out_root = Path(config.out)
    out_root.mkdir(parents=True, exist_ok=True)
    all_outcomes = []
    with open(out_root / "run.log", "a") as logf:
        logf.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} start {json.dumps(asdict(config), sort_keys=True)}\n")
        for c in config.capacities:
            for o in run_instance(config, c, out_root):
                logf.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {o.report.instance} {o.variant} {o.status} "
                           f"{o.wall_time:.2f}s {o.message}\n")
                all_outcomes.append(o)
    return exit_code(o.status for o in all_outcomes), all_outcomes


def exit_code(statuses) -> int:
    statuses = set(statuses)
    if ERROR in statuses:
        return EXIT_ERROR
    if TIME_LIMIT in statuses:
        return EXIT_TIME_LIMIT
    if INFEASIBLE in statuses:
        return EXIT_INFEASIBLE
    return EXIT_OK


def min_feasible_capacity(topology: str, variant: str = "bp111", w_cap: float = 0.8, bandwidth: float = 1.0,
                          lo: int = 1, hi: int = 1000, solver: str = "highs", time_limit: float | None = None) -> int | None:
    """Smallest integer uniform capacity for which ``variant`` is feasible (binary search)."""

    def feasible(c):
        config = ExperimentConfig(topology, [float(c)], bandwidth, w_cap, [variant], solver, time_limit)
        return run_instance(config, float(c))[0].status in (OPTIMAL, TIME_LIMIT)

    if not feasible(hi):
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo
