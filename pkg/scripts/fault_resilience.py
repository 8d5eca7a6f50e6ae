#!/usr/bin/env python3
"""Success before and after each architecture's characteristic failure.

Napster loses its index server, the super-peer overlay loses its busiest
super node and Gnutella loses a random tenth of its peers, all at mid-run.
"""

import argparse

from p2psim.cli import compare_row
from p2psim.simnet import load_spec
from p2psim.simnet.metrics import rows_to_table

DEFAULT = "scenarios/napster_star.toml,scenarios/gnutella_random.toml,scenarios/superpeer_ft.toml,scenarios/superpeer_openft.toml"
COLUMNS = ("scenario", "failure", "completeness", "success_before_failure", "success_after_failure", "orphans_unattached")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--specs", default=DEFAULT)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    rows = []
    for path in args.specs.split(","):
        spec = load_spec(path)
        row, violations = compare_row(spec, spec.seed if args.seed is None else args.seed)
        rows.append({c: row[c] for c in COLUMNS} | {"violations": len(violations)})
    print(rows_to_table(rows), end="")


if __name__ == "__main__":
    main()
