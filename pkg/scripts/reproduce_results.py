"""Run every preset instance with all six variants and compare averages to the reference results.

    python3 scripts/reproduce_results.py --out runs/results [--time-limit 1800] [--only polska]

Writes the usual per-instance artifacts plus ``comparison.csv``. The reference
numbers are the reference averages in percent; a blank means
the model was infeasible there.
"""
import argparse
import csv
import sys
from pathlib import Path

from detourplan.experiment import PRESETS, ExperimentConfig, exit_code, run_experiment

# (instance, model) -> (backup length, occupation, reverse path) averages
REFERENCE = {
    ("polska-c14", "bp111"): (48, 68, 36), ("polska-c14", "bp100"): (80, 69, 6),
    ("polska-c14", "bp010"): (47, 68, 50), ("polska-c14", "bp001"): (52, 64, 92),
    ("polska-c14", "ca"): (103, 54, 75), ("polska-c14", "e2e"): (85, 64, 100),
    ("polska-c100", "bp111"): (48, 9, 43), ("polska-c100", "bp100"): (105, 10, 4),
    ("polska-c100", "bp010"): (47, 9, 69), ("polska-c100", "bp001"): (50, 9, 97),
    ("polska-c100", "ca"): (103, 7, 81), ("polska-c100", "e2e"): (79, 9, 100),
    ("norway-c30", "bp111"): (32, 59, 42), ("norway-c30", "bp100"): (79, 61, 15),
    ("norway-c30", "bp010"): (29, 58, 57), ("norway-c30", "bp001"): (40, 53, 91),
    ("norway-c30", "ca"): (99, 45, 61),
    ("norway-c300", "bp111"): (29, 6, 31), ("norway-c300", "bp100"): (94, 7, 4),
    ("norway-c300", "bp010"): (27, 6, 59), ("norway-c300", "bp001"): (36, 5, 93),
    ("norway-c300", "ca"): (107, 4, 61),
    ("fat-tree4-c13", "bp111"): (0, 59, 100), ("fat-tree4-c13", "bp100"): (67, 57, 4),
    ("fat-tree4-c13", "bp010"): (0, 52, 97), ("fat-tree4-c13", "bp001"): (0, 50, 100),
    ("fat-tree4-c13", "ca"): (103, 50, 85), ("fat-tree4-c13", "e2e"): (0, 50, 100),
    ("fat-tree4-c100", "bp111"): (0, 6, 100), ("fat-tree4-c100", "bp100"): (75, 8, 0),
    ("fat-tree4-c100", "bp010"): (0, 7, 89), ("fat-tree4-c100", "bp001"): (0, 6, 100),
    ("fat-tree4-c100", "ca"): (20, 6, 84), ("fat-tree4-c100", "e2e"): (0, 6, 100),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/results")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--solver", default="highs")
    p.add_argument("--only", action="append", help="restrict to these presets")
    args = p.parse_args(argv)

    rows, statuses = [], []
    for topo in PRESETS:
        if args.only and topo not in args.only:
            continue
        config = ExperimentConfig(topo, [], solver=args.solver, time_limit=args.time_limit, out=args.out)
        _, outcomes = run_experiment(config)
        for o in outcomes:
            statuses.append(o.status)
            r = o.report
            got = [getattr(r, m).avg if getattr(r, m) else None for m in ("backup_length", "occupation", "reverse_path")]
            ref = REFERENCE.get((r.instance, o.variant), (None,) * 3)
            rows.append([r.instance, o.variant, o.status, f"{o.wall_time:.1f}"]
                        + [_fmt(x) for x in got] + [_fmt(x) for x in ref])
            print(" ".join(f"{x:>12}" for x in rows[-1][:7]), flush=True)

    out = Path(args.out) / "comparison.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "model", "status", "seconds", "backup_avg", "occupation_avg", "reverse_avg",
                    "ref_backup_avg", "ref_occupation_avg", "ref_reverse_avg"])
        w.writerows(rows)
    print(f"wrote {out}")
    return exit_code(statuses)


def _fmt(x):
    return "" if x is None else f"{x:.2f}"


if __name__ == "__main__":
    sys.exit(main())
