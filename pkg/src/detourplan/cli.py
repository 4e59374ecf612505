"""Command line entry point: ``plan``, ``simulate``, ``report``, ``mincap`` and ``info``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .experiment import (EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, PRESETS, ExperimentConfig, min_feasible_capacity,
                         run_experiment)
from .metrics import METRICS, REPORT_NOTE, STATS
from .milp import VARIANTS
from .plans import StaleArtifactError, read_plan
from .routing import build_demands
from .scenarios import FailureEvent
from .sim import LINK, NODE, validate_plan
from .topology import TopologyError, resolve_topology


def _variants(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def cmd_plan(args) -> int:
    if args.config:
        configs = ExperimentConfig.from_json(json.loads(Path(args.config).read_text()))
    else:
        if not args.topology:
            print("plan: --topology or --config is required", file=sys.stderr)
            return EXIT_ERROR
        configs = [ExperimentConfig(args.topology, args.capacity or [], args.bd, args.wcap, _variants(args.variants),
                                    args.solver, args.time_limit, args.gap, args.out, args.lp)]
    code = EXIT_OK
    for config in configs:
        if args.out and args.config:
            config.out = args.out
        rc, outcomes = run_experiment(config)
        for o in outcomes:
            print(f"{o.report.instance:>18} {o.variant:>6} {o.status:>10} {o.wall_time:8.1f}s")
        code = max(code, rc)
    return code


def _parse_event(text: str) -> FailureEvent:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected N,M, got {text!r}")
    return FailureEvent(parts[0].strip(), parts[1].strip())


def cmd_simulate(args) -> int:
    try:
        loaded = read_plan(args.plan)
    except (StaleArtifactError, FileNotFoundError) as exc:
        print(f"simulate: stale or missing plan artifact: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if loaded.plan is None:
        print(f"simulate: plan has status {loaded.doc['status']!r} and carries no routes", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out or Path(args.plan).parent / "sim")
    out.mkdir(parents=True, exist_ok=True)
    traces = []
    if args.event:
        event = _parse_event(args.event)
        if event not in loaded.scenarios.affected:
            print(f"simulate: {event.label()} is not a failure detection event of this plan", file=sys.stderr)
            return EXIT_ERROR
        one = dataclasses.replace(loaded.scenarios, events=(event,))
        report = validate_plan(loaded.topology, loaded.routing, loaded.plan, one, args.packets, (args.kind,), traces)
    else:
        report = validate_plan(loaded.topology, loaded.routing, loaded.plan, loaded.scenarios, args.packets,
                               (LINK, NODE), traces)
    with open(out / "traces.jsonl", "w") as fh:
        for t in traces:
            fh.write(t.jsonl())
    (out / "validation.json").write_text(json.dumps(report.to_json(), indent=1) + "\n")
    print(f"replays={report.replays} delivered={report.delivered}/{report.injected} "
          f"violations={len(report.avoidance_violations)} h_mismatches={len(report.h_mismatches)} -> {out}")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_report(args) -> int:
    rows = []
    for path in sorted(Path(args.runs).rglob("metrics.json")):
        rows.append(json.loads(path.read_text()))
    if not rows:
        print(f"report: no metrics.json under {args.runs}", file=sys.stderr)
        return EXIT_ERROR
    if args.format == "json":
        text = json.dumps({"note": REPORT_NOTE, "runs": rows}, indent=1) + "\n"
    else:
        cols = ["instance", "model", "status"] + [f"{m}_{s}" for m in METRICS for s in STATS]
        lines = [",".join(cols)] + [",".join(str(r.get(c, "")) for c in cols) for r in rows]
        text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_mincap(args) -> int:
    c = min_feasible_capacity(args.topology, args.variant, args.wcap, args.bd, args.lo, args.hi, args.solver,
                              args.time_limit)
    if c is None:
        print(f"{args.topology}: {args.variant} infeasible even at capacity {args.hi}")
        return EXIT_ERROR
    print(f"{args.topology}: minimum uniform capacity for {args.variant} = {c}")
    return EXIT_OK


def cmd_info(args) -> int:
    try:
        topo = resolve_topology(args.topology, 1.0)
    except (TopologyError, OSError) as exc:
        print(f"info: {exc}", file=sys.stderr)
        return EXIT_ERROR
    s = topo.summary()
    print(f"{topo.name}: |N|={s['nodes']} |A|={s['arcs']} edge={s['edge']} core={s['core']} "
          f"|D|={len(build_demands(topo))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="detourplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    pl = sub.add_parser("plan", help="solve backup-path models and write plans + metrics")
    pl.add_argument("--topology", help="topology file, bundled name (polska, norway) or fat-tree:K")
    pl.add_argument("--capacity", type=float, action="append",
                    help=f"uniform arc capacity; repeat for several regimes (presets: {PRESETS})")
    pl.add_argument("--wcap", type=float, default=0.8)
    pl.add_argument("--bd", type=float, default=1.0, help="bandwidth of every demand")
    pl.add_argument("--variants", default=",".join(VARIANTS))
    pl.add_argument("--solver", default="highs", help="highs (default) or cbc")
    pl.add_argument("--time-limit", type=float, default=None)
    pl.add_argument("--gap", type=float, default=0.0)
    pl.add_argument("--out", default="runs")
    pl.add_argument("--lp", action="store_true", help="also export each model in LP format")
    pl.add_argument("--config", help="JSON experiment matrix instead of the flags above")
    pl.set_defaults(func=cmd_plan)

    sm = sub.add_parser("simulate", help="replay a plan in the crankback simulator")
    sm.add_argument("--plan", required=True)
    g = sm.add_mutually_exclusive_group(required=True)
    g.add_argument("--all-events", action="store_true")
    g.add_argument("--event", help="N,M failure detection event")
    sm.add_argument("--kind", choices=(LINK, NODE), default=LINK)
    sm.add_argument("--packets", type=int, default=3)
    sm.add_argument("--out")
    sm.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="collect metrics of finished runs")
    rp.add_argument("--runs", required=True)
    rp.add_argument("--format", choices=("csv", "json"), default="csv")
    rp.add_argument("--output")
    rp.set_defaults(func=cmd_report)

    mc = sub.add_parser("mincap", help="binary-search the smallest feasible uniform capacity")
    mc.add_argument("--topology", required=True)
    mc.add_argument("--variant", default="bp111")
    mc.add_argument("--wcap", type=float, default=0.8)
    mc.add_argument("--bd", type=float, default=1.0)
    mc.add_argument("--lo", type=int, default=1)
    mc.add_argument("--hi", type=int, default=1000)
    mc.add_argument("--solver", default="highs")
    mc.add_argument("--time-limit", type=float, default=None)
    mc.set_defaults(func=cmd_mincap)

    inf = sub.add_parser("info", help="print instance size (nodes, arcs, edge/core split, demands)")
    inf.add_argument("--topology", required=True)
    inf.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
