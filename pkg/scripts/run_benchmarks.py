#!/usr/bin/env python3
"""Desk-scale execution-path comparison.

Times the optimized staged plan against the cross-product baseline on a
selective query at two database scales, and the subgraph sampler against
full materialization on an unfiltered query. Mirrors the acceptance
performance suite; tweak --large / --small to explore other sizes.
"""

import argparse
import json

from pql.bench import format_report, run_bench
from pql.store import build_row_graph
from pql.synth import generate, hm_genspec

FILTERED = (
    "PREDICT COUNT(TRANSACTIONS.*, 0, 7, days) FOR EACH CUSTOMERS.CUSTOMER_ID "
    "WHERE CUSTOMERS.AGE > 97"
)
UNFILTERED = "PREDICT COUNT(TRANSACTIONS.*, 0, 7, days) FOR EACH CUSTOMERS.CUSTOMER_ID"


def bench(scale: float, seed: int, runs: int, pairs: int):
    print(f"\n=== scale {scale} (generating...)")
    db = generate(hm_genspec(scale=scale, seed=seed))
    build_row_graph(db)
    print(f"transactions: {db.nrows('TRANSACTIONS')}")
    report = run_bench(db, FILTERED, paths=["optimized", "unoptimized"], runs=runs)
    print("--- selective static filter")
    print(format_report(report))
    out = {"filtered": report.to_json()}
    if pairs:
        report = run_bench(db, UNFILTERED, paths=["sampler"], runs=runs, pairs=pairs)
        print("--- sampler vs full materialization (no filter)")
        print(format_report(report))
        out["sampler"] = report.to_json()
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--large", type=float, default=0.04, help="large database scale (1.24M tx)")
    ap.add_argument("--small", type=float, default=0.001, help="small database scale (31k tx)")
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", help="write the combined JSON report here")
    args = ap.parse_args()

    results = {
        "large": bench(args.large, args.seed, args.runs, args.pairs),
        "small": bench(args.small, args.seed, args.runs, 0),
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
