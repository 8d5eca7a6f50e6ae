#!/usr/bin/env python3
"""Paired runs with pong caching off and on: same seed, same workload."""

import argparse
import copy

from p2psim.simnet import load_spec, run_spec
from p2psim.simnet.metrics import rows_to_table

KEYS = ("ping_pong_total", "count_Ping", "count_Pong", "pings_beyond_one_hop", "messages_total", "success_ratio")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", default="scenarios/gnutella_pong_caching.toml")
    ap.add_argument("--seeds", default="1,2,3")
    args = ap.parse_args()
    base = load_spec(args.spec)
    rows = []
    for seed in map(int, args.seeds.split(",")):
        for caching in (False, True):
            spec = copy.deepcopy(base)
            spec.protocol.pong_caching = caching
            rep = run_spec(spec, seed).report
            rows.append({"seed": seed, "caching": caching, **{k: rep.get(k, 0) for k in KEYS}})
    print(rows_to_table(rows), end="")
    for off, on in zip(rows[::2], rows[1::2]):
        cut = 1 - on["ping_pong_total"] / off["ping_pong_total"]
        print(f"seed {off['seed']}: ping+pong traffic reduced by {cut:.1%}")


if __name__ == "__main__":
    main()
