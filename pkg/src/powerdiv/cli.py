"""Command-line front end.

Exit codes: 0 when every certification passes, 2 on a margin violation and
3 on a configuration, parse or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .bounds import bound_for_variant, cor1_bound, ipm15_upper
from .config import GRID_VARIANTS, load_config
from .distributions import DEFAULT_CAP
from .errors import InputError, SupportTooLarge
from .model import (
    REGISTRY,
    as_counts,
    get_function,
    make_spec,
    parse_number_list,
    read_counts,
    read_probs,
)
from .verify import (
    SCANS,
    STAT_HEADER,
    fmt,
    run_lemma_scan,
    run_sweep,
    run_verify,
    stat_rows,
    sweep_header,
    to_csv,
    verify_csv,
)

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_INPUT = 3

BOUND_CHOICES = GRID_VARIANTS + ("ipm15",)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code instead of argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _probs_or_uniform(arg: str | None, r: int) -> list[float]:
    return read_probs(arg) if arg else [1.0 / r] * r


def cmd_stat(args) -> int:
    counts = read_counts(args.counts)
    c = counts.counts
    spec = make_spec(sum(c), _probs_or_uniform(args.probs, len(c)))
    u = as_counts(c, spec)
    lambdas = parse_number_list(args.lam) if args.lam else [1.0, 0.0, -0.5]
    _emit(to_csv(STAT_HEADER, stat_rows(u, spec, lambdas)), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.n is None:
        raise InputError("bound needs --n")
    if not args.probs:
        raise InputError("bound needs --probs")
    spec = make_spec(args.n, read_probs(args.probs))
    lambdas = parse_number_list(args.lam) if args.lam else [1.0]
    variants = [v.strip() for v in args.variant.split(",")] if args.variant else ["C5", "C2", "cor1"]
    for v in variants:
        if v not in BOUND_CHOICES:
            raise InputError(f"unknown variant {v!r}; choose from {', '.join(BOUND_CHOICES)}")
    h = get_function(args.function)
    reports = []
    for lam in lambdas:
        for v in variants:
            if v == "cor1":
                rep = cor1_bound(spec, lam)
            elif v == "ipm15":
                rep = ipm15_upper(spec, lam)
            else:
                rep = bound_for_variant(spec, lam, h, v)
            body = rep.to_json()
            body.update({"variant": v, "lambda": fmt(lam), "n": spec.n, "probs": [fmt(p) for p in spec.probs]})
            if v not in ("cor1", "ipm15"):
                body["function"] = h.name
            body["value"] = fmt(rep.value)
            body["terms"] = {k: fmt(x) for k, x in rep.terms}
            reports.append(body)
    _emit(json.dumps(reports, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _grid_config(args):
    cfg = load_config(args.config)
    if args.cap is not None:
        cfg = replace(cfg, cap=args.cap)
    if args.lam:
        cfg = replace(cfg, lambdas=tuple(parse_number_list(args.lam)))
    return cfg


def cmd_verify(args) -> int:
    cfg = _grid_config(args)
    rows = run_verify(cfg, jobs=args.jobs)
    _emit(verify_csv(rows), args.out)
    bad = [r for r in rows if r.violated]
    skipped = sum(1 for r in rows if r.status != "ok")
    print(f"verify: {len(rows)} checks, {skipped} with failed preconditions, {len(bad)} violations", file=sys.stderr)
    for r in bad:
        print(f"  violation: {r.cell.spec.label()} lambda={fmt(r.lam)} {r.function} {r.variant} margin={fmt(r.margin)}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _grid_config(args)
    _emit(to_csv(sweep_header(cfg), run_sweep(cfg, jobs=args.jobs)), args.out)
    return EXIT_OK


def cmd_lemma_scan(args) -> int:
    res = run_lemma_scan(args.which)
    _emit(res.csv(), args.out)
    print(f"{args.which}: {len(res.rows)} points, min margin {fmt(res.min_margin)} at {res.argmin}", file=sys.stderr)
    return EXIT_VIOLATION if res.violated else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="powerdiv", description="Power divergence statistics and chi-square approximation bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, grid: bool = False):
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--lambda", dest="lam", help="comma-separated lambda values; fractions like 2/3 allowed")
        if grid:
            sp.add_argument("--config", help="grid config file (flat key = value)")
            sp.add_argument("--jobs", type=int, default=1, help="worker threads for exact enumeration")
            sp.add_argument("--cap", type=int, default=None, help=f"support size cap (default {DEFAULT_CAP})")

    s = sub.add_parser("stat", help="statistics for observed counts")
    s.add_argument("--counts", required=True, help="CSV with header cell,count or a JSON array")
    s.add_argument("--probs", help="comma-separated list or file; default uniform")
    common(s)
    s.set_defaults(func=cmd_stat)

    b = sub.add_parser("bound", help="evaluate bounds as JSON")
    b.add_argument("--n", type=int)
    b.add_argument("--probs")
    b.add_argument("--function", default="exp", choices=sorted(REGISTRY))
    b.add_argument("--variant", help=f"comma-separated from {', '.join(BOUND_CHOICES)}")
    common(b)
    b.set_defaults(func=cmd_bound)

    v = sub.add_parser("verify", help="exact oracle against every bound on a grid")
    common(v, grid=True)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="bounds and exact distances over a parameter grid")
    common(w, grid=True)
    w.set_defaults(func=cmd_sweep)

    ls = sub.add_parser("lemma-scan", help="margins of the supporting inequalities")
    ls.add_argument("which", choices=SCANS)
    ls.add_argument("--out")
    ls.set_defaults(func=cmd_lemma_scan)
    return p


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    """Rewrite ``--lambda -1/2,0`` as ``--lambda=-1/2,0`` so argparse keeps the value."""
    out: list[str] = []
    it = iter(argv)
    for a in it:
        if a in ("--lambda", "--probs"):
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-"):
                out.append(f"{a}={nxt}")
                continue
            out.append(a)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(a)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(sys.argv[1:] if argv is None else argv))
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (InputError, SupportTooLarge) as exc:
        print(f"powerdiv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
