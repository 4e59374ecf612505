"""Bar charts of average metrics per model, one panel per metric, for one instance directory.

    python3 scripts/plot_metrics.py runs/results/polska-c14 [--out polska.png]

Also draws the per-arc occupation distribution from each variant's occupation.csv.
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = ("backup_length", "occupation", "reverse_path")


def load(instance_dir: Path):
    with open(instance_dir / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    occ = {}
    for r in rows:
        f = instance_dir / r["model"] / "occupation.csv"
        if f.is_file():
            with open(f) as fh:
                occ[r["model"]] = [float(x["occupation_pct"]) for x in csv.DictReader(fh)]
    return rows, occ


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("instance_dir", type=Path)
    p.add_argument("--out", type=Path)
    args = p.parse_args(argv)
    rows, occ = load(args.instance_dir)
    fig, axes = plt.subplots(1, len(METRICS) + 1, figsize=(16, 3.5))
    models = [r["model"] for r in rows]
    for ax, m in zip(axes, METRICS):
        avg = [float(r[f"{m}_avg"] or 0) for r in rows]
        sd = [float(r[f"{m}_sd"] or 0) for r in rows]
        ax.bar(models, avg, yerr=sd, color="lightgray", edgecolor="black", capsize=3)
        ax.set_title(f"{m} avg (%)")
    if occ:
        axes[-1].boxplot(list(occ.values()))
        axes[-1].set_xticks(range(1, len(occ) + 1), list(occ))
    axes[-1].set_title("per-arc occupation (%)")
    fig.suptitle(args.instance_dir.name)
    fig.tight_layout()
    out = args.out or args.instance_dir / "metrics.png"
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
