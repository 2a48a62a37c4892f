"""Explicit finite-sample bounds on the chi-square approximation.

Every bound returns a :class:`BoundReport`. Its ``terms`` are additive and
``value`` is their correctly rounded sum; a failed precondition yields
``value = inf`` instead of an exception so that sweeps can record it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .distributions import chi2_cdf
from .errors import IndexOutOfRange, OrderOutOfRange
from .model import (
    BoundReport,
    DivergenceIndex,
    MultinomialSpec,
    Precondition,
    TestFunctionSpec,
    as_index,
)

INF = math.inf

# Stein solution constant sqrt(2) (sqrt(2 pi) + 1/e)
GAUNT_C = math.sqrt(2.0) * (math.sqrt(2.0 * math.pi) + math.exp(-1.0))
G63_COEFF = Fraction(51, 8)  # 6.375

# Pearson-statistic bounds: coefficient of ||h^(k)|| for each k.
PEARSON_COEFFS: dict[str, dict[int, int]] = {
    "G5": {0: 19, 1: 366, 2: 2016, 3: 5264, 4: 106965, 5: 302922},
    "G2": {0: 3, 1: 23, 2: 42},
    "T0_15": {1: 122, 2: 1970, 3: 6943, 4: 12731, 5: 643710},
    "T0_12": {1: 115, 2: 536},
    "T0_25": {2: 19, 3: 206, 4: 545, 5: 161348},
    "T0_22": {2: 238},
}

# Coefficients of ||h'||, ..., ||h^(4)|| in the |lambda - 1| r block.
LAMBDA_BLOCK = {1: 2, 2: 202, 3: 819, 4: 100974}

# Intermediate bounds in terms of ||f''||, ..., ||f^(6)|| (keyed by f order).
INTERMEDIATE = {
    "n1": {2: 19, 3: 309, 4: 1089, 5: 1997, 6: 100974},
    "n_half": {2: 18, 3: 84},
}

IPM15_CONST = 665476
IPM15_LAMBDA = 101997


@dataclass(frozen=True)
class NormBundle:
    """``||h^(k)||`` for k = 0..5; ``inf`` where unbounded."""

    norms: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.norms) != 6:
            raise ValueError("NormBundle needs six entries (orders 0..5)")
        if any(not (x >= 0) for x in self.norms):
            raise ValueError(f"norms must be nonnegative: {self.norms}")

    @classmethod
    def of(cls, h: TestFunctionSpec | Sequence[float] | "NormBundle") -> "NormBundle":
        if isinstance(h, NormBundle):
            return h
        if isinstance(h, TestFunctionSpec):
            return cls(tuple(float(x) for x in h.deriv_norms))
        vals = [float(x) for x in h]
        vals += [0.0] * (6 - len(vals))
        return cls(tuple(vals))

    @classmethod
    def unit(cls, lo: int, hi: int) -> "NormBundle":
        return cls(tuple(1.0 if lo <= k <= hi else 0.0 for k in range(6)))

    def __getitem__(self, k: int) -> float:
        return self.norms[k]

    def finite(self, orders) -> bool:
        return all(math.isfinite(self.norms[k]) for k in orders)


def _lambda_value(idx) -> float:
    lam = as_index(idx).lam
    if lam <= -1.0:
        raise IndexOutOfRange(f"bounds need lambda > -1, got {lam!r}")
    return lam


def _pre(name: str, required: str, actual: float, ok: bool) -> Precondition:
    return Precondition(name, required, float(actual), bool(ok))


def _norm_pre(norms: NormBundle, orders) -> Precondition:
    orders = sorted(orders)
    worst = max(norms[k] for k in orders)
    label = ",".join(str(k) for k in orders)
    return _pre("norms_finite", f"||h^(k)|| < inf for k in {{{label}}}", worst, math.isfinite(worst))


def _report(theorem: str, terms: list[tuple[str, float]], pres: list[Precondition]) -> BoundReport:
    if all(p.satisfied for p in pres):
        value = math.fsum(v for _, v in terms)
        return BoundReport(value, theorem, tuple(terms), tuple(pres))
    kept = tuple((k, v) for k, v in terms if math.isfinite(v))
    return BoundReport(INF, theorem, kept, tuple(pres))


def _weighted_norm_terms(prefix: str, coeffs: dict[int, int], norms: NormBundle, scale: float) -> list[tuple[str, float]]:
    out = []
    for k, c in coeffs.items():
        nk = norms[k]
        out.append((f"{prefix}h{k}", scale * c * nk if math.isfinite(nk) else INF))
    return out


def _lambda_parts(lam: float, r: int):
    """Return the three lambda factors, or literal zeros at lam == 1."""
    if lam == 1.0:
        return 0.0, 0.0, 0.0
    a = abs(lam - 1.0) * r
    b = 19.0 / 9.0 * (lam - 1.0) ** 2
    c = abs((lam - 1.0) * (lam - 2.0)) * (12.0 * lam + 13.0) / (6.0 * (lam + 1.0))
    return a, b, c


def _thm2_lambda_factor(lam: float) -> float:
    if lam == 1.0:
        return 0.0
    return abs(lam - 1.0) * (4.0 * lam + 7.0) / (lam + 1.0)


# ---------------------------------------------------------------------------
# Pearson statistic
# ---------------------------------------------------------------------------


def _pearson_scale(spec: MultinomialSpec, variant: str) -> float:
    r, n = spec.r, spec.n
    sq = spec.sqrt_inv_sum
    if variant == "G5":
        return 4.0 / ((r + 1) * n) * sq * sq
    if variant == "G2":
        return 24.0 / (r + 1) * spec.inv_sqrt_np_sum
    if variant == "T0_15":
        return sq * sq / (math.sqrt(r + 1) * n)
    if variant == "T0_12":
        return 1.0 / math.sqrt(r + 1) * spec.inv_sqrt_np_sum
    if variant == "T0_25":
        return sq * sq / n
    if variant == "T0_22":
        return spec.inv_sqrt_np_sum
    raise ValueError(f"unknown Pearson bound variant {variant!r}")


def pearson_bound(spec: MultinomialSpec, norms, variant: str) -> BoundReport:
    """Bounds on ``|E h(chi^2) - E h(Y)|`` for Pearson's statistic."""
    norms = NormBundle.of(norms)
    coeffs = PEARSON_COEFFS.get(variant)
    if coeffs is None:
        raise ValueError(f"unknown Pearson bound variant {variant!r}")
    scale = _pearson_scale(spec, variant)
    terms = _weighted_norm_terms("", coeffs, norms, scale)
    pres = [
        _pre("np_star", ">= 1", spec.n_p_star, spec.n_p_star >= 1.0),
        _norm_pre(norms, coeffs),
    ]
    tag = "thm0:" + variant if variant.startswith("T0") else "pearson:" + variant
    return _report(tag, terms, pres)


# ---------------------------------------------------------------------------
# Power divergence: order 1/n
# ---------------------------------------------------------------------------


def _thm1_preconditions(spec: MultinomialSpec, lam: float) -> list[Precondition]:
    x = spec.n_p_star
    pres = [_pre("np_star", f">= r = {spec.r}", x, x >= spec.r)]
    if lam >= 3.0:
        need = 2.0 * (lam - 3.0) ** 2
        pres.append(_pre("np_star_lambda", f">= 2(lambda-3)^2 = {need:.17g}", x, x >= need))
    return pres


def thm1_bound(spec: MultinomialSpec, idx, norms, variant: str = "C5") -> BoundReport:
    """Order ``1/n`` bound for ``T_lambda`` (variants ``C5`` and ``C15``)."""
    lam = _lambda_value(idx)
    norms = NormBundle.of(norms)
    r = spec.r
    if variant == "C5":
        lead, coeffs, orders = 4.0 * r / (r + 1), PEARSON_COEFFS["G5"], range(0, 6)
    elif variant == "C15":
        lead, coeffs, orders = r / math.sqrt(r + 1), PEARSON_COEFFS["T0_15"], range(1, 6)
    else:
        raise ValueError(f"unknown Theorem 1 variant {variant!r}")
    outer = spec.inv_sum / spec.n
    terms = _weighted_norm_terms("pearson:", coeffs, norms, outer * lead)
    a, b, c = _lambda_parts(lam, r)
    if a == 0.0:
        terms += [("lambda:linear", 0.0), ("lambda:quadratic", 0.0), ("lambda:cubic", 0.0)]
    else:
        block = math.fsum(cf * norms[k] for k, cf in LAMBDA_BLOCK.items())
        terms += [
            ("lambda:linear", outer * a * block),
            ("lambda:quadratic", outer * b * norms[2]),
            ("lambda:cubic", outer * c * norms[1]),
        ]
    pres = _thm1_preconditions(spec, lam) + [_norm_pre(norms, orders)]
    return _report("thm1:" + variant, terms, pres)


def ipm15_upper(spec: MultinomialSpec, idx) -> BoundReport:
    """Upper end of the ``d_{1,5}`` sandwich (the ``C15`` bound with unit norms, simplified)."""
    lam = _lambda_value(idx)
    r = spec.r
    outer = spec.inv_sum / spec.n
    a, b, c = _lambda_parts(lam, r)
    terms = [
        ("pearson", outer * IPM15_CONST * math.sqrt(r)),
        ("lambda:linear", outer * IPM15_LAMBDA * a),
        ("lambda:quadratic", outer * b),
        ("lambda:cubic", outer * c),
    ]
    return _report("ipm15", terms, _thm1_preconditions(spec, lam))


def mean_gap_leading(spec: MultinomialSpec, idx) -> float:
    """Leading ``1/n`` term of ``E[T_lambda] - (r - 1)`` (signed)."""
    lam = as_index(idx).lam
    if lam <= -1.0:
        raise IndexOutOfRange(f"mean gap needs lambda > -1, got {lam!r}")
    if lam == 1.0:
        return 0.0
    n = spec.n
    return math.fsum(
        (lam - 1.0) / (n * p) * ((3.0 * lam - 2.0) / 12.0 - lam * p / 2.0 + (3.0 * lam + 2.0) / 12.0 * p * p)
        for p in spec.probs
    )


# ---------------------------------------------------------------------------
# Power divergence: order n^{-1/2}
# ---------------------------------------------------------------------------


def _thm2_preconditions(spec: MultinomialSpec, lam: float) -> list[Precondition]:
    x = spec.n_p_star
    pres = [_pre("np_star", ">= 2", x, x >= 2.0)]
    if lam >= 2.0:
        need = 2.0 * (lam - 2.0) ** 2
        pres.append(_pre("np_star_lambda", f">= 2(lambda-2)^2 = {need:.17g}", x, x >= need))
    return pres


def thm2_bound(spec: MultinomialSpec, idx, norms, variant: str = "C2") -> BoundReport:
    """Order ``n^{-1/2}`` bound for ``T_lambda`` (variants ``C2`` and ``C12``).

    The Pearson part is computed exactly as in :func:`pearson_bound` so that
    at ``lambda = 1`` both agree bit for bit.
    """
    lam = _lambda_value(idx)
    norms = NormBundle.of(norms)
    if variant == "C2":
        base = "G2"
    elif variant == "C12":
        base = "T0_12"
    else:
        raise ValueError(f"unknown Theorem 2 variant {variant!r}")
    coeffs = PEARSON_COEFFS[base]
    terms = _weighted_norm_terms("", coeffs, norms, _pearson_scale(spec, base))
    lf = _thm2_lambda_factor(lam)
    terms.append(("lambda", 0.0 if lf == 0.0 else lf * norms[1] * spec.inv_sqrt_np_sum))
    pres = _thm2_preconditions(spec, lam) + [_norm_pre(norms, coeffs)]
    return _report("thm2:" + variant, terms, pres)


# ---------------------------------------------------------------------------
# Kolmogorov distance
# ---------------------------------------------------------------------------

# (lead, middle, lambda divisor, tail) per case, plus exponents
_COR1 = {
    2: (8.0, 21.0, 52.0, 72.0),
    3: (19.0, 44.0, 25.0, 72.0),
    4: (13.0, 37.0, 30.0, 72.0),
}


def cor1_bound(spec: MultinomialSpec, idx) -> BoundReport:
    """Kolmogorov distance bound derived from the order ``n^{-1/2}`` bound."""
    lam = _lambda_value(idx)
    r = spec.r
    x = spec.n_p_star
    lead, mid, div, tail = _COR1[min(r, 4)]
    lam_part = 0.0 if lam == 1.0 else abs(lam - 1.0) * (4.0 * lam + 7.0) * r / (div * (lam + 1.0))
    if r == 2:
        pre, step, step2 = x ** -0.1, x ** -0.2, x ** -0.4
    elif r == 3:
        pre, step, step2 = x ** (-1.0 / 6.0), x ** (-1.0 / 6.0), x ** (-1.0 / 3.0)
    else:
        q = r - 3.0
        pre = 1.0 / (q ** (1.0 / 3.0) * x ** (1.0 / 6.0))
        step = q ** (1.0 / 6.0) / x ** (1.0 / 6.0)
        step2 = q ** (1.0 / 3.0) / x ** (1.0 / 3.0)
    terms = [
        ("lead", pre * lead),
        ("middle", pre * mid * step),
        ("lambda", pre * lam_part * step),
        ("tail", pre * tail * step2),
    ]
    case = str(r) if r < 4 else ">=4"
    return _report(f"cor1:r={case}", terms, _thm2_preconditions(spec, lam))


def cor1_alpha(spec: MultinomialSpec) -> float:
    """Smoothing width used for each case of the Kolmogorov bound."""
    x, r = spec.n_p_star, spec.r
    if r == 2:
        return 52.75 * x ** -0.2
    if r == 3:
        return 25.27 * x ** (-1.0 / 6.0)
    return 30.58 * (r - 3.0) ** (1.0 / 6.0) * x ** (-1.0 / 6.0)


def interval_mass_bound(r: int, alpha: float) -> float:
    """Upper bound on ``P(z <= Y <= z + alpha)`` uniform in ``z``."""
    if r == 2:
        return math.sqrt(2.0 * alpha / math.pi)
    if r == 3:
        return alpha / 2.0
    return alpha / (2.0 * math.sqrt(math.pi * (r - 3.0)))


def interval_mass_sup(r: int, alpha: float) -> float:
    """``sup_z P(z <= Y <= z + alpha)`` computed numerically (for checking the bound above)."""
    dof = r - 1
    if dof <= 2:
        # density nonincreasing: the sup is at z = 0
        return chi2_cdf(dof, alpha)
    mode = dof - 2.0
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(
        lambda z: -(chi2_cdf(dof, z + alpha) - chi2_cdf(dof, z)),
        bounds=(max(0.0, mode - alpha), mode),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(-res.fun)


def cor1_construction(spec: MultinomialSpec, idx, alpha: float | None = None) -> float:
    """Smoothing-argument value the Kolmogorov bound is built from, before rounding."""
    lam = _lambda_value(idx)
    r = spec.r
    x = spec.n_p_star
    a = cor1_alpha(spec) if alpha is None else float(alpha)
    lam_num = 0.0 if lam == 1.0 else abs((lam - 1.0) * (4.0 * lam + 7.0)) * r / (lam + 1.0)
    smooth = (72.0 + 1104.0 / a + lam_num / a + 4032.0 / (a * a)) / math.sqrt(x)
    return smooth + interval_mass_bound(r, a)


# ---------------------------------------------------------------------------
# Stein solution bounds and constant reconstruction
# ---------------------------------------------------------------------------

STEIN_RULES = ("luk", "gaunt_general", "g63", "g632", "useful1")
_MIN_ORDER = {"luk": 1, "gaunt_general": 1, "g63": 2, "g632": 2, "useful1": 2}


def stein_rule_orders(rule: str) -> range:
    """Orders ``k`` of ``f^(k)`` a rule covers given norms of ``h`` up to order 5."""
    hi = 5 if rule == "luk" else 6
    return range(_MIN_ORDER[rule], hi + 1)


def stein_rule_norm_orders(rule: str, k: int) -> tuple[int, ...]:
    """Orders of ``h`` derivatives the rule's right-hand side uses."""
    if rule == "luk":
        return (k,)
    if rule == "useful1":
        return (k - 2, k - 1)
    return (k - 1,)


def g632_factor(k: int) -> float:
    d = 2.0 * k - 1.0
    return GAUNT_C / math.sqrt(d) + 4.0 / d


def gaunt_factor(k: int, dof: float) -> float:
    d = dof + 2.0 * k - 2.0
    return GAUNT_C / math.sqrt(d) + 4.0 / d


def stein_norm_bound(k: int, dof: float, norms, rule: str) -> float:
    """Bound on ``||f^(k)||`` for the chi-square(dof) Stein solution."""
    if rule not in STEIN_RULES:
        raise ValueError(f"unknown rule {rule!r}")
    if k not in stein_rule_orders(rule):
        raise OrderOutOfRange(f"rule {rule} does not cover k={k}")
    norms = NormBundle.of(norms)
    need = stein_rule_norm_orders(rule, k)
    if not norms.finite(need):
        return INF
    if rule == "luk":
        return 2.0 * norms[k] / k
    if rule == "gaunt_general":
        return gaunt_factor(k, dof) * norms[k - 1]
    if rule == "g63":
        return 6.375 * norms[k - 1] / math.sqrt(dof + 1.0)
    if rule == "g632":
        return g632_factor(k) * norms[k - 1]
    return 4.0 / (dof + 2.0) * (3.0 * norms[k - 1] + 2.0 * norms[k - 2])


def _ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def reconstruct_thm0(variant: str) -> list[int]:
    """Rebuild Theorem 0's integer coefficients from the intermediate bounds.

    ``T0_15``/``T0_12`` bound every ``||f^(k)||`` by ``6.375 ||h^(k-1)||`` and
    round up. ``T0_25``/``T0_22`` use ``2||h^(k)||/k`` for the lower orders and
    the ``g632`` factor for the top one. Returned lists follow the order of
    :data:`PEARSON_COEFFS`.
    """
    if variant in ("T0_15", "T0_12"):
        src = INTERMEDIATE["n1" if variant == "T0_15" else "n_half"]
        return [_ceil_fraction(c * G63_COEFF) for c in src.values()]
    if variant in ("T0_25", "T0_22"):
        src = INTERMEDIATE["n1" if variant == "T0_25" else "n_half"]
        top = max(src)
        acc: dict[int, float] = {}
        for k, c in src.items():
            if k == top:
                acc[k - 1] = acc.get(k - 1, 0.0) + c * g632_factor(k)
            else:
                acc[k] = acc.get(k, 0.0) + float(Fraction(2 * c, k))
        return [math.ceil(acc[k] - 1e-9) for k in sorted(acc)]
    raise ValueError(f"no reconstruction for variant {variant!r}")


def reconstruction_report() -> list[tuple[str, list[int], list[int], bool]]:
    """``(variant, rebuilt, displayed, match)`` for all four Theorem 0 variants."""
    out = []
    for v in ("T0_15", "T0_12", "T0_25", "T0_22"):
        rebuilt = reconstruct_thm0(v)
        shown = list(PEARSON_COEFFS[v].values())
        out.append((v, rebuilt, shown, rebuilt == shown))
    return out


def bound_for_variant(spec: MultinomialSpec, idx, h, variant: str) -> BoundReport:
    """Dispatch by variant tag (``C5``, ``C15``, ``C2``, ``C12``, Pearson tags)."""
    if variant in ("C5", "C15"):
        return thm1_bound(spec, idx, h, variant)
    if variant in ("C2", "C12"):
        return thm2_bound(spec, idx, h, variant)
    return pearson_bound(spec, h, variant)


# Which smoothness classes each smooth-function bound needs.
VARIANT_ORDERS = {
    "C5": (0, 5),
    "C15": (1, 5),
    "C2": (0, 2),
    "C12": (1, 2),
    "G5": (0, 5),
    "G2": (0, 2),
    "T0_15": (1, 5),
    "T0_12": (1, 2),
    "T0_25": (2, 5),
    "T0_22": (2, 2),
}


def applies(h: TestFunctionSpec, variant: str) -> bool:
    """True when every norm the variant uses is finite for ``h``.

    A function with Lipschitz ``h'`` counts with the essential sup of ``h''``,
    which is how the smoothing function enters the order 2 bounds.
    """
    lo, hi = VARIANT_ORDERS[variant]
    return h.in_class(lo, hi)
