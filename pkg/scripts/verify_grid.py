"""Run the oracle-dominance grid and print per-variant summaries.

    python3 scripts/verify_grid.py [--config grid.cfg] [--jobs 8] [--out verify.csv]
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from powerdiv.config import load_config
from powerdiv.verify import run_verify, verify_csv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    rows = run_verify(load_config(args.config), jobs=args.jobs)
    if args.out:
        Path(args.out).write_text(verify_csv(rows))
    by_variant = defaultdict(list)
    for r in rows:
        by_variant[r.variant].append(r)
    print(f"{'variant':8} {'checks':>7} {'skipped':>8} {'min margin':>12} {'median bound/distance':>22}")
    for v, rs in by_variant.items():
        ok = [r for r in rs if r.status == "ok"]
        ratios = sorted(r.bound / r.distance for r in ok if r.distance > 0)
        worst = min((r.margin for r in ok), default=float("nan"))
        med = ratios[len(ratios) // 2] if ratios else float("nan")
        print(f"{v:8} {len(ok):7d} {len(rs) - len(ok):8d} {worst:12.3e} {med:22.4g}")
    bad = sum(r.violated for r in rows)
    print(f"{bad} violations")
    return 2 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
