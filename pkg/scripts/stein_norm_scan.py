"""Numerical Stein-solution norms against every applicable bound rule.

    python3 scripts/stein_norm_scan.py [--dof 1,2,3,5] [--out norms.csv]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from powerdiv.model import parse_number_list
from powerdiv.verify import stein_norm_scan


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dof", default="1,2,3,5")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    res = stein_norm_scan(tuple(int(d) for d in parse_number_list(args.dof)))
    if args.out:
        Path(args.out).write_text(res.csv())
    tightest: dict[str, tuple[float, str]] = {}
    for row, label in zip(res.rows, res.labels):
        rule, ratio = row[0], row[6]
        if rule not in tightest or ratio > tightest[rule][0]:
            tightest[rule] = (ratio, label)
    for rule, (ratio, label) in tightest.items():
        print(f"{rule:14} max estimate/bound {ratio:.4f} at {label}")
    print(f"{len(res.rows)} pairs, min margin {res.min_margin:.3e}")
    return 2 if res.violated else 0


if __name__ == "__main__":
    sys.exit(main())
