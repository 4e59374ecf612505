"""Regenerate the bundled Polska/Norway topology files.

Reads the SNDlib node-link JSON dumps shipped with the ``topohub`` package and
writes connectivity-only topology files. Core nodes are the highest
betweenness-centrality nodes (ties broken by name); everything else is an
edge node.

    pip install topohub networkx
    python scripts/make_sndlib_topologies.py src/detourplan/data
"""
import json
import sys
from importlib import resources
from pathlib import Path

import networkx as nx

CORE_COUNT = {"polska": 3, "norway": 11}


def convert(name, n_core):
    raw = json.loads(resources.files("topohub").joinpath(f"data/sndlib/{name}.json").read_text())
    names = {n["id"]: n["name"] for n in raw["nodes"]}
    g = nx.Graph()
    g.add_nodes_from(names.values())
    g.add_edges_from((names[e["source"]], names[e["target"]]) for e in raw["edges"])
    bc = nx.betweenness_centrality(g)
    core = set(sorted(g, key=lambda n: (-bc[n], n))[:n_core])
    nodes = [{"id": names[i], "role": "core" if names[i] in core else "edge"} for i in sorted(names)]
    links = [{"a": a, "b": b} for a, b in sorted((names[e["source"]], names[e["target"]]) for e in raw["edges"])]
    lines = ['{', f'  "name": "{name}",', '  "nodes": [']
    lines += ["    " + json.dumps(n) + ("," if k < len(nodes) - 1 else "") for k, n in enumerate(nodes)]
    lines += ["  ],", '  "links": [']
    lines += ["    " + json.dumps(l) + ("," if k < len(links) - 1 else "") for k, l in enumerate(links)]
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/detourplan/data")
    for name, n_core in CORE_COUNT.items():
        (out / f"{name}.json").write_text(convert(name, n_core))
