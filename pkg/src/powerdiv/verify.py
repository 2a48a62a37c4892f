"""Certification runs: exact oracle against each bound, sweeps and lemma scans.

Every runner returns plain rows in a fixed order. Formatting to CSV happens in
:func:`to_csv` with 17 significant digits, so output depends only on the
inputs and never on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import lemmas
from .bounds import (
    PEARSON_COEFFS,
    STEIN_RULES,
    applies,
    bound_for_variant,
    cor1_bound,
    stein_norm_bound,
    stein_rule_orders,
)
from .config import GridCell, GridConfig
from .distributions import (
    chi2_cdf,
    chi2_expectation,
    exact_distribution,
    exact_expectation,
    exact_kolmogorov,
)
from .errors import NoConvergence, SupportTooLarge
from .model import REGISTRY, MultinomialSpec, get_function, registry
from .statistics import statistic
from .stein import estimate_sup_norm

MARGIN_TOL = 1e-9
LEMMA_TOL = 1e-9
STEIN_SLACK = 1e-3
PEARSON_ONLY = tuple(PEARSON_COEFFS)

OK = "ok"
PRE_FAILED = "precondition failed"
NOT_APPLICABLE = "not applicable"


def fmt(x) -> str:
    """17 significant digits for floats, ``inf``/``-inf``/``nan`` spelled out."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, int)) and not isinstance(x, float):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def probs_text(spec: MultinomialSpec) -> str:
    return " ".join(fmt(p) for p in spec.probs)


# ---------------------------------------------------------------------------
# stat
# ---------------------------------------------------------------------------

STAT_HEADER = ("lambda", "statistic", "tail_prob")


def stat_rows(counts, spec: MultinomialSpec, lambdas: Sequence[float]) -> list[tuple]:
    """One row per lambda: the statistic and its chi-square upper tail probability."""
    out = []
    for lam in lambdas:
        value = statistic(counts, spec, lam)
        if math.isinf(value):
            out.append((lam, "infinite", 0.0))
        else:
            out.append((lam, value, 1.0 - chi2_cdf(spec.r - 1, value)))
    return out


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

VERIFY_HEADER = (
    "n",
    "r",
    "family",
    "probs",
    "lambda",
    "function",
    "variant",
    "theorem",
    "distance",
    "bound",
    "margin",
    "status",
    "dominant",
)


@dataclass(frozen=True)
class VerifyRow:
    cell: GridCell
    lam: float
    function: str
    variant: str
    theorem: str
    distance: float
    bound: float
    status: str
    dominant: str

    @property
    def margin(self) -> float:
        return self.bound - self.distance

    @property
    def violated(self) -> bool:
        return self.status == OK and self.margin < -MARGIN_TOL

    def as_tuple(self) -> tuple:
        s = self.cell.spec
        margin = self.margin if self.status == OK else None
        return (
            s.n,
            s.r,
            self.cell.family,
            probs_text(s),
            self.lam,
            self.function,
            self.variant,
            self.theorem,
            self.distance,
            self.bound,
            margin,
            self.status,
            self.dominant,
        )


def _smooth_gap(dist, dof: int, name: str) -> float:
    h = get_function(name)
    return abs(exact_expectation(dist, h) - chi2_expectation(dof, h))


def verify_cell(cell: GridCell, lam: float, cfg: GridConfig, *, jobs: int = 1) -> list[VerifyRow]:
    """All configured bound checks for one ``(spec, lambda)`` pair."""
    spec = cell.spec
    dof = spec.r - 1
    dist = exact_distribution(spec, lam, cap=cfg.cap, jobs=jobs)
    rows: list[VerifyRow] = []
    smooth = [v for v in cfg.variants if v != "cor1" and (lam == 1.0 or v not in PEARSON_ONLY)]
    for name in cfg.functions:
        h = get_function(name)
        usable = [v for v in smooth if applies(h, v)]
        if not usable:
            continue
        gap = _smooth_gap(dist, dof, name)
        for v in usable:
            rep = bound_for_variant(spec, lam, h, v)
            status = OK if rep.ok else PRE_FAILED
            rows.append(VerifyRow(cell, lam, name, v, rep.theorem, gap, rep.value, status, rep.dominant_term()))
    if "cor1" in cfg.variants:
        rep = cor1_bound(spec, lam)
        dk = exact_kolmogorov(dist, dof)
        status = OK if rep.ok else PRE_FAILED
        rows.append(VerifyRow(cell, lam, "kolmogorov", "cor1", rep.theorem, dk, rep.value, status, rep.dominant_term()))
    return rows


def run_verify(cfg: GridConfig, *, jobs: int = 1) -> list[VerifyRow]:
    rows: list[VerifyRow] = []
    for cell in cfg.cells():
        for lam in cfg.lambdas:
            rows.extend(verify_cell(cell, lam, cfg, jobs=jobs))
    return rows


def verify_csv(rows: Sequence[VerifyRow]) -> str:
    return to_csv(VERIFY_HEADER, (r.as_tuple() for r in rows))


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def sweep_header(cfg: GridConfig) -> tuple[str, ...]:
    return (
        ("n", "r", "family", "probs", "lambda", "function", "distance", "kolmogorov")
        + tuple(f"bound_{v}" for v in cfg.variants)
        + ("dominant",)
    )


def run_sweep(cfg: GridConfig, *, jobs: int = 1) -> list[tuple]:
    """Wide rows in ``(cell, lambda, function)`` order.

    A bound column is empty where the variant does not apply to the function
    or, for Pearson-only variants, where ``lambda != 1``. The distance columns
    are empty when the support exceeds the cap. ``dominant`` names the largest
    term of the smallest finite bound.
    """
    out = []
    for cell in cfg.cells():
        spec = cell.spec
        dof = spec.r - 1
        for lam in cfg.lambdas:
            try:
                dist = exact_distribution(spec, lam, cap=cfg.cap, jobs=jobs)
            except SupportTooLarge:
                dist = None
            dk = exact_kolmogorov(dist, dof) if dist is not None else None
            for name in cfg.functions:
                h = get_function(name)
                gap = _smooth_gap(dist, dof, name) if dist is not None else None
                values = []
                best = None
                for v in cfg.variants:
                    if v == "cor1":
                        rep = cor1_bound(spec, lam)
                    elif (v in PEARSON_ONLY and lam != 1.0) or not applies(h, v):
                        values.append(None)
                        continue
                    else:
                        rep = bound_for_variant(spec, lam, h, v)
                    values.append(rep.value)
                    if math.isfinite(rep.value) and (best is None or rep.value < best.value):
                        best = rep
                dominant = f"{best.theorem}/{best.dominant_term()}" if best is not None else ""
                out.append((spec.n, spec.r, cell.family, probs_text(spec), lam, name, gap, dk, *values, dominant))
    return out


# ---------------------------------------------------------------------------
# lemma scans
# ---------------------------------------------------------------------------

LEMMA_HEADER = ("variant", "lambda", "x", "a", "lhs", "rhs", "margin")
STEIN_HEADER = ("rule", "dof", "function", "k", "estimate", "bound", "ratio", "margin")
SCANS = ("moments", "ahle", "cross", "taylor1", "taylor2", "stein_norms")
STEIN_DOFS = (1, 2, 3, 5)


@dataclass(frozen=True)
class ScanResult:
    header: tuple[str, ...]
    rows: list[tuple]
    margins: list[float]
    labels: list[str]

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else math.inf

    @property
    def argmin(self) -> str:
        if not self.margins:
            return ""
        i = min(range(len(self.margins)), key=self.margins.__getitem__)
        return self.labels[i]

    @property
    def violated(self) -> bool:
        return self.min_margin < -LEMMA_TOL

    def csv(self) -> str:
        return to_csv(self.header, self.rows)


def _lemma_result(rows: Iterable[lemmas.MarginRow]) -> ScanResult:
    out, margins, labels = [], [], []
    for r in rows:
        m = r.margin
        out.append((r.variant, r.lam, r.x, r.a, r.lhs, r.rhs, m))
        margins.append(m)
        labels.append(f"{r.variant} lambda={fmt(r.lam)} x={fmt(r.x)} a={fmt(r.a)}")
    return ScanResult(LEMMA_HEADER, out, margins, labels)


def stein_norm_scan(dofs: Sequence[int] = STEIN_DOFS) -> ScanResult:
    """Numerical ``||f^(k)||`` against every applicable rule.

    ``margin = bound (1 + 1e-3) - estimate``; ``ratio = estimate / bound``.
    Orders whose estimate does not converge are skipped when no rule applies
    to them, since no finite bound is claimed there.
    """
    rows, margins, labels = [], [], []
    for dof in dofs:
        for h in registry():
            for rule in STEIN_RULES:
                for k in stein_rule_orders(rule):
                    bound = stein_norm_bound(k, dof, h, rule)
                    if not math.isfinite(bound):
                        continue
                    try:
                        est = estimate_sup_norm(dof, h, k)
                    except NoConvergence:
                        est = math.nan
                    ratio = est / bound if bound > 0 else (0.0 if est == 0 else math.inf)
                    margin = bound * (1.0 + STEIN_SLACK) - est
                    if math.isnan(margin):
                        margin = -math.inf
                    rows.append((rule, dof, h.name, k, est, bound, ratio, margin))
                    margins.append(margin)
                    labels.append(f"{rule} dof={dof} {h.name} k={k}")
    return ScanResult(STEIN_HEADER, rows, margins, labels)


def run_lemma_scan(which: str) -> ScanResult:
    if which == "moments":
        return _lemma_result(lemmas.moment_scan())
    if which == "ahle":
        return _lemma_result(lemmas.ahle_scan())
    if which == "cross":
        return _lemma_result(lemmas.cross_scan())
    if which == "taylor1":
        return _lemma_result(lemmas.taylor_scan(1))
    if which == "taylor2":
        return _lemma_result(lemmas.taylor_scan(2))
    if which == "stein_norms":
        return stein_norm_scan()
    raise ValueError(f"unknown scan {which!r}; choose from {', '.join(SCANS)}")


__all__ = [
    "REGISTRY",
    "fmt",
    "to_csv",
    "stat_rows",
    "run_verify",
    "verify_csv",
    "run_sweep",
    "sweep_header",
    "run_lemma_scan",
    "stein_norm_scan",
    "ScanResult",
    "VerifyRow",
]
