#!/usr/bin/env python3
"""Nodes examined per query, super-peer overlay vs flat Gnutella on the same mesh.

For each children-per-super value the super mesh is the same random regular
graph the flat run uses (same seed), so the ratio isolates the effect of
children being searched through their super node's index.
"""

import argparse
import random

from p2psim.superpeer import coverage_ratio
from p2psim.simnet import ProtocolConfig, QuerySpec, ScenarioSpec, WorkloadConfig, run_spec
from p2psim.simnet.metrics import rows_to_table


def reach(topology, params, protocol, origins, ttl, seed):
    queries = [QuerySpec(100 + 50 * i, o, "nobody - has.mp3") for i, o in enumerate(origins)]
    wl = WorkloadConfig(files_per_node=0, queries=queries)
    spec = ScenarioSpec("ratio", seed, topology, params, ProtocolConfig(protocol, ttl=ttl), wl, 100 + 50 * len(origins) + 2000)
    return run_spec(spec).report["mean_nodes_reached"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--supers", type=int, default=50)
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--children", default="1,2,5,10,20")
    ap.add_argument("--ttl", type=int, default=7)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()
    k, rng = args.supers, random.Random(args.seed)
    flat = reach("decentralized", {"n": k, "degree": args.degree}, "gnutella",
                 rng.sample(range(k), args.queries), args.ttl, args.seed)
    rows = []
    for m in map(int, args.children.split(",")):
        if m < 1:
            ap.error("queries come from children, so children_per_super must be at least 1")
        params = {"supers": k, "children_per_super": m, "super_degree": args.degree}
        origins = rng.sample(range(k, k + k * m), args.queries)
        hybrid = reach("centralized-decentralized", params, "superpeer-ft", origins, args.ttl, args.seed)
        rows.append({
            "children_per_super": m, "flat_reached": flat, "superpeer_reached": hybrid,
            "measured_ratio": hybrid / flat if flat else 0.0, "predicted_ratio": coverage_ratio(m),
        })
    print(rows_to_table(rows), end="")


if __name__ == "__main__":
    main()
