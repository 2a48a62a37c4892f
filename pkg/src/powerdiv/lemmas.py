"""Signed margins (right side minus left side) for the supporting inequalities.

A nonnegative margin certifies an inequality at one point; grids of margins
show where an inequality is tight. Taylor remainders are evaluated in the
relative variable ``t = (x - a)/a`` with ``log1p``/``expm1`` so that the
cancellation near ``x = a`` costs ``eps * |t|`` rather than ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .distributions import exact_binomial_moment, exact_cross_moment
from .errors import HypothesisViolated, NegativeArgument, VariantDomainError
from .model import MultinomialSpec, make_spec

MOMENT_CONSTANTS = {"abs3": 3.0, "central4": 4.0, "central6": 28.0}
TAYLOR_VARIANTS = ("log", "high_lambda", "mid_lambda")


@dataclass(frozen=True)
class MarginRow:
    variant: str
    lam: float | None
    x: float
    a: float
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return margin_of(self.lhs, self.rhs)


def margin_of(lhs: float, rhs: float) -> float:
    if math.isinf(rhs) and rhs > 0:
        return math.inf
    return rhs - lhs


# ---------------------------------------------------------------------------
# Binomial and multinomial moments
# ---------------------------------------------------------------------------


def moment_margin(n: int, p: float, kind: str) -> float:
    """``C - E[...]`` for ``E|S|^3 <= 3``, ``E S^4 <= 4``, ``E S^6 <= 28`` (needs ``np >= 2``)."""
    if kind not in MOMENT_CONSTANTS:
        raise ValueError(f"unknown moment kind {kind!r}")
    if n * p < 2.0:
        raise HypothesisViolated(f"moment bounds need np >= 2, got np = {n * p!r}")
    return MOMENT_CONSTANTS[kind] - exact_binomial_moment(n, p, kind)


def ahle_rhs(n: int, p: float, k: float) -> float:
    mu = n * p
    return math.exp(k * k / (2.0 * mu) + k * math.log(mu))


def ahle_margin(n: int, p: float, k: float) -> float:
    """``exp(k^2/(2np)) (np)^k - E[U^k]`` for ``U ~ Bin(n, p)``."""
    if not k > 0:
        raise ValueError("k must be positive")
    return ahle_rhs(n, p, k) - exact_binomial_moment(n, p, ("raw", k))


def cross_moment_rhs(spec: MultinomialSpec, j: int, k: int) -> float:
    return 6.0 / spec.r + 4.0 * math.sqrt(spec.probs[j] * spec.probs[k])


def cross_moment_margin(spec: MultinomialSpec, j: int, k: int) -> float:
    """``6/r + 4 sqrt(p_j p_k) - |E[S_j^3 S_k^3]|`` (0-based cells; needs ``n p_j >= r``)."""
    low = spec.n_p_star
    if low < spec.r:
        raise HypothesisViolated(f"cross-moment bound needs n p_j >= r = {spec.r}, got n p_* = {low!r}")
    return cross_moment_rhs(spec, j, k) - abs(exact_cross_moment(spec, j, k))


# ---------------------------------------------------------------------------
# Taylor remainders
# ---------------------------------------------------------------------------


def _check_xa(x: float, a: float) -> None:
    if x < 0 or not math.isfinite(x):
        raise NegativeArgument(f"x must be finite and >= 0, got {x!r}")
    if not a > 0:
        raise NegativeArgument(f"a must be positive, got {a!r}")


def _xlogx_rel(t: float) -> float:
    """``2 (1+t) log(1+t)`` with the value 0 at ``t = -1``."""
    return 0.0 if t == -1.0 else 2.0 * (1.0 + t) * math.log1p(t)


def _power_rel(lam: float, t: float) -> float:
    """``(1+t)^(lam+1) - 1`` for ``t >= -1`` and ``lam > -1``."""
    if t == -1.0:
        return -1.0
    return math.expm1((lam + 1.0) * math.log1p(t))


def _polynomial_case(lam: float, order: int) -> bool:
    """True when ``x^(lam+1)`` is a polynomial of degree at most ``order``; the remainder is then 0."""
    m = lam + 1.0
    return m == math.floor(m) and 1.0 <= m <= order


def _ratio_power(x: float, a: float, e: float) -> float:
    if x == 0.0:
        if e > 0:
            return 0.0
        if e == 0:
            return 1.0
        return math.inf
    return (x / a) ** e


def _check_variant(variant: str, lam: float | None, lo_high: float, hi_mid: float) -> float:
    if variant not in TAYLOR_VARIANTS:
        raise VariantDomainError(f"unknown variant {variant!r}")
    if variant == "log":
        return 0.0
    if lam is None or not math.isfinite(lam):
        raise VariantDomainError(f"variant {variant} needs a finite lambda")
    lam = float(lam)
    if variant == "high_lambda" and lam < lo_high:
        raise VariantDomainError(f"high_lambda needs lambda >= {lo_high:g}, got {lam!r}")
    if variant == "mid_lambda" and not (-1.0 < lam < hi_mid and lam != 0.0):
        raise VariantDomainError(f"mid_lambda needs lambda in (-1, {hi_mid:g}) without 0, got {lam!r}")
    return lam


def taylor_L1_sides(variant: str, lam: float | None, x: float, a: float) -> tuple[float, float]:
    """``(|LHS|, RHS)`` of the third-order Taylor remainder bounds."""
    _check_xa(x, a)
    lam = _check_variant(variant, lam, 3.0, 3.0)
    t = (x - a) / a
    t4 = t**4
    if variant == "log":
        g = _xlogx_rel(t) - 2.0 * t - t * t + t**3 / 3.0
        return a * abs(g), a * 2.0 * t4 / 3.0
    c1 = lam + 1.0
    c2 = lam * (lam + 1.0) / 2.0
    c3 = (lam - 1.0) * lam * (lam + 1.0) / 6.0
    g = 0.0 if _polynomial_case(lam, 3) else _power_rel(lam, t) - c1 * t - c2 * t * t - c3 * t**3
    lhs = a * abs(g)
    if variant == "high_lambda":
        k = (lam - 2.0) * (lam - 1.0) * lam * (lam + 1.0) / 24.0
        return lhs, a * k * (1.0 + _ratio_power(x, a, lam - 3.0)) * t4
    k = abs((lam - 2.0) * (lam - 1.0) * lam) / 6.0
    return lhs, a * k * t4


def taylor_L2_sides(variant: str, lam: float | None, x: float, a: float) -> tuple[float, float]:
    """``(|LHS|, RHS)`` of the second-order Taylor remainder bounds."""
    _check_xa(x, a)
    lam = _check_variant(variant, lam, 2.0, 2.0)
    t = (x - a) / a
    t3 = abs(t) ** 3
    if variant == "log":
        g = _xlogx_rel(t) - 2.0 * t - t * t
        return a * abs(g), a * t3
    c1 = lam + 1.0
    c2 = lam * (lam + 1.0) / 2.0
    g = 0.0 if _polynomial_case(lam, 2) else _power_rel(lam, t) - c1 * t - c2 * t * t
    lhs = a * abs(g)
    if variant == "high_lambda":
        k = (lam - 1.0) * lam * (lam + 1.0) / 6.0
        return lhs, a * k * (1.0 + _ratio_power(x, a, lam - 2.0)) * t3
    k = abs((lam - 1.0) * lam) / 2.0
    return lhs, a * k * t3


def taylor_margin_L1(variant: str, lam: float | None, x: float, a: float) -> float:
    return margin_of(*taylor_L1_sides(variant, lam, x, a))


def taylor_margin_L2(variant: str, lam: float | None, x: float, a: float) -> float:
    return margin_of(*taylor_L2_sides(variant, lam, x, a))


# ---------------------------------------------------------------------------
# Scan grids
# ---------------------------------------------------------------------------

SCAN_A = (0.5, 1.0, 2.0, 10.0)
SCAN_LAMBDAS = (-0.99, -0.5, -0.1, 0.5, 2.0 / 3.0, 1.5, 2.0, 2.5, 3.0, 3.5, 5.0, 10.0)


def scan_x(a: float) -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-3.0, 3.0, 200) * a])


def _lambdas_for(variant: str, high_from: float, mid_below: float) -> list[float | None]:
    if variant == "log":
        return [None]
    if variant == "high_lambda":
        return [l for l in SCAN_LAMBDAS if l >= high_from]
    return [l for l in SCAN_LAMBDAS if -1.0 < l < mid_below and l != 0.0]


def taylor_scan(which: int) -> Iterator[MarginRow]:
    """Rows over the documented grid; ``which`` is 1 (third order) or 2 (second order)."""
    sides = taylor_L1_sides if which == 1 else taylor_L2_sides
    cut = 3.0 if which == 1 else 2.0
    for variant in TAYLOR_VARIANTS:
        for lam in _lambdas_for(variant, cut, cut):
            for a in SCAN_A:
                for x in scan_x(a):
                    lhs, rhs = sides(variant, lam, float(x), a)
                    yield MarginRow(f"L{which}-{variant}", lam, float(x), a, lhs, rhs)


MOMENT_N = (1, 2, 3, 4, 5, 8, 10, 20, 50, 100, 1000)
MOMENT_P = (0.01, 0.05, 0.1, 0.2, 0.25, 1.0 / 3.0, 0.5, 0.7, 0.9, 0.99)


def moment_scan() -> Iterator[MarginRow]:
    """Moment bounds on every ``(n, p)`` with ``np >= 2``; ``x`` holds n, ``a`` holds p."""
    for n in MOMENT_N:
        for p in MOMENT_P:
            if n * p < 2.0:
                continue
            for kind, c in MOMENT_CONSTANTS.items():
                yield MarginRow(kind, None, float(n), p, exact_binomial_moment(n, p, kind), c)


AHLE_N = (1, 2, 5, 10, 20, 50, 100)
AHLE_P = (0.05, 0.25, 0.5, 0.9)
AHLE_K = (0.5, 1.0, 1.5, 2.0, 3.0, 3.5, 5.0)


def ahle_scan() -> Iterator[MarginRow]:
    """``lam`` holds k, ``x`` holds n, ``a`` holds p."""
    for n in AHLE_N:
        for p in AHLE_P:
            for k in AHLE_K:
                lhs = exact_binomial_moment(n, p, ("raw", k))
                yield MarginRow("ahle", k, float(n), p, lhs, ahle_rhs(n, p, k))


CROSS_SPECS = (
    (4, (0.5, 0.5)),
    (20, (0.3, 0.7)),
    (12, (1 / 3, 1 / 3, 1 / 3)),
    (40, (0.25, 0.25, 0.25, 0.25)),
    (60, (0.2, 0.3, 0.5)),
    (100, (0.1, 0.2, 0.3, 0.4)),
    (30, (0.2, 0.2, 0.2, 0.2, 0.2)),
)


def cross_scan() -> Iterator[MarginRow]:
    """``lam`` holds the pair code ``10 j + k``, ``x`` holds n, ``a`` holds r."""
    for n, probs in CROSS_SPECS:
        spec = make_spec(n, probs)
        for j in range(spec.r):
            for k in range(j + 1, spec.r):
                lhs = abs(exact_cross_moment(spec, j, k))
                yield MarginRow(f"cross:{spec.label()}", float(10 * j + k), float(n), float(spec.r), lhs, cross_moment_rhs(spec, j, k))
