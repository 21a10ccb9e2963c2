#!/usr/bin/env python3
"""End-to-end walkthrough on a synthetic retail database.

Generates data, then runs the running example queries through validation,
planning, training-table and prediction-table materialization, and the
low-latency sampler. Everything lands under ./demo_out by default.
"""

import argparse
import sys
from pathlib import Path

from pql.cli import main as pql

QUERIES = {
    "shirt_demand": (
        'PREDICT COUNT(TRANSACTIONS.*, 0, 3, months)\n'
        "FOR EACH ARTICLES.ARTICLE_ID\n"
        'WHERE ARTICLES.ARTICLE_TYPE = "shirt"'
    ),
    "active_spender": (
        "PREDICT SUM(transactions.value, 15, 45, days) > 100\n"
        "  OR COUNT(transactions.*, 15, 45, days) > 10\n"
        "FOR EACH customers.customer_id\n"
        "WHERE COUNT(transactions.*, -40, 0, days) > 0\n"
        "ASSUMING COUNT(notifications.*, 0, 15, days) > 0"
    ),
    "blue_articles": (
        "PREDICT LIST_DISTINCT(TRANSACTIONS.ARTICLE_ID\n"
        '    WHERE TRANSACTIONS.VALUE > 50 AND ARTICLES.COLOR = "blue",\n'
        "    0, 30, days)\n"
        "FOR EACH CUSTOMERS.CUSTOMER_ID"
    ),
}


def run(argv):
    print(f"\n$ pql {' '.join(argv)}")
    code = pql(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out", help="output directory")
    ap.add_argument("--scale", type=float, default=0.002, help="database scale")
    args = ap.parse_args()

    root = Path(args.out)
    data = root / "data"
    run(["gen-data", "--out-dir", str(data), "--scale", str(args.scale), "--seed", "7"])

    for name, query in QUERIES.items():
        print(f"\n=== {name} " + "=" * (60 - len(name)))
        run(["validate", "--schema", str(data / "schema.json"), "--query", query])
        run(["plan", "--schema", str(data / "schema.json"), "--query", query])
        run(["train-table", "--data-dir", str(data), "--out-dir", str(root / name), "--query", query])
        run(["predict-table", "--data-dir", str(data), "--out-dir", str(root / name), "--query", query])

    print("\n=== sampler " + "=" * 52)
    run(
        ["sample", "--data-dir", str(data), "--out-dir", str(root / "sample"), "--pairs", "50",
         "--query", "PREDICT COUNT(TRANSACTIONS.*, 0, 7, days) FOR EACH CUSTOMERS.CUSTOMER_ID"]
    )
    print(f"\nAll outputs under {root}/")


if __name__ == "__main__":
    main()
