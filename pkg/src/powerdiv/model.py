"""Domain types: the multinomial null model, the divergence index, smooth
test functions and the report containers shared by every other module.

All types are immutable after construction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    CountSumMismatch,
    InvalidCounts,
    NonPositiveProbability,
    ParseError,
    ProbabilitySumError,
    TooFewCells,
)
from .summation import total

PROB_SUM_TOL = 1e-9
INF = math.inf


# ---------------------------------------------------------------------------
# Null model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultinomialSpec:
    """``n`` trials over ``r = len(probs)`` cells under the null ``probs``.

    Use :func:`make_spec` to build one from user input; the constructor
    assumes ``probs`` is already validated.
    """

    n: int
    probs: tuple[float, ...]
    p_star: float = field(init=False)
    inv_sum: float = field(init=False)
    sqrt_inv_sum: float = field(init=False)

    def __post_init__(self) -> None:
        p = self.probs
        object.__setattr__(self, "p_star", min(p))
        object.__setattr__(self, "inv_sum", math.fsum(1.0 / q for q in p))
        object.__setattr__(self, "sqrt_inv_sum", math.fsum(1.0 / math.sqrt(q) for q in p))

    @property
    def r(self) -> int:
        return len(self.probs)

    @property
    def n_p_star(self) -> float:
        return self.n * self.p_star

    @property
    def p(self) -> np.ndarray:
        return np.array(self.probs, dtype=float)

    @property
    def expected(self) -> np.ndarray:
        return self.n * self.p

    @property
    def inv_sqrt_np_sum(self) -> float:
        """``sum_j 1/sqrt(n p_j)``."""
        return self.sqrt_inv_sum / math.sqrt(self.n)

    def label(self) -> str:
        ps = " ".join(format(q, ".6g") for q in self.probs)
        return f"n={self.n};p=[{ps}]"


def make_spec(n: int, probs: Sequence[float]) -> MultinomialSpec:
    """Validate ``probs`` and return the null model for ``n`` trials.

    Probabilities summing to one within ``1e-9`` are accepted and rescaled so
    that the stored vector sums to one as closely as floating point allows.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidCounts(f"trial count must be a positive integer, got {n!r}")
    p = [float(q) for q in probs]
    if len(p) < 2:
        raise TooFewCells(f"need at least 2 cells, got {len(p)}")
    if any(not math.isfinite(q) or q <= 0.0 for q in p):
        raise NonPositiveProbability(f"all probabilities must be > 0: {p}")
    s = math.fsum(p)
    if abs(s - 1.0) > PROB_SUM_TOL:
        raise ProbabilitySumError(f"probabilities sum to {s!r}, not 1")
    if s != 1.0:
        p = [q / s for q in p]
    return MultinomialSpec(int(n), tuple(p))


def uniform_spec(n: int, r: int) -> MultinomialSpec:
    return make_spec(n, [1.0 / r] * r)


# ---------------------------------------------------------------------------
# Divergence index
# ---------------------------------------------------------------------------


class Regime(Enum):
    ZERO = "zero"
    MINUS_ONE = "minus_one"
    GENERIC = "generic"


@dataclass(frozen=True)
class DivergenceIndex:
    """The index ``lambda`` of the power divergence family.

    Values below -1 are rejected. Exactly -1 is kept for the modified
    likelihood ratio statistic; bound operations refuse it.
    """

    lam: float

    def __post_init__(self) -> None:
        from .errors import IndexOutOfRange

        lam = float(self.lam)
        if not math.isfinite(lam) or lam < -1.0:
            raise IndexOutOfRange(f"lambda must be >= -1, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    @property
    def regime(self) -> Regime:
        if self.lam == 0.0:
            return Regime.ZERO
        if self.lam == -1.0:
            return Regime.MINUS_ONE
        return Regime.GENERIC


def as_index(idx: DivergenceIndex | float) -> DivergenceIndex:
    return idx if isinstance(idx, DivergenceIndex) else DivergenceIndex(float(idx))


# ---------------------------------------------------------------------------
# Counts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountsVector:
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.counts, dtype=dtype)

    def __len__(self) -> int:
        return len(self.counts)


def as_counts(counts, spec: MultinomialSpec) -> np.ndarray:
    """Return ``counts`` as an integer array after checking it against ``spec``."""
    if isinstance(counts, CountsVector):
        counts = counts.counts
    arr = np.asarray(counts)
    if arr.ndim != 1 or arr.size != spec.r:
        raise InvalidCounts(f"expected {spec.r} cell counts, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InvalidCounts(f"counts must be integers: {counts}")
    elif arr.dtype.kind not in "iu":
        raise InvalidCounts(f"counts must be integers: {counts}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise InvalidCounts(f"counts must be nonnegative: {counts}")
    if int(arr.sum()) != spec.n:
        raise CountSumMismatch(f"counts sum to {int(arr.sum())}, expected n={spec.n}")
    return arr


@dataclass(frozen=True)
class StandardizedCounts:
    s: tuple[float, ...]

    def weighted_sum(self, spec: MultinomialSpec) -> float:
        return math.fsum(math.sqrt(p) * v for p, v in zip(spec.probs, self.s))


def standardize(counts, spec: MultinomialSpec) -> StandardizedCounts:
    """``s_j = (U_j - n p_j) / sqrt(n p_j)``."""
    u = as_counts(counts, spec).astype(float)
    e = spec.expected
    return StandardizedCounts(tuple(((u - e) / np.sqrt(e)).tolist()))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothnessClass:
    """``C_b^{j,k}``: derivatives of orders ``j..k`` bounded (0 means ``h`` itself)."""

    j: int
    k: int

    def __post_init__(self) -> None:
        if not (0 <= self.j <= self.k <= 5):
            raise ValueError(f"invalid smoothness class C_b^{{{self.j},{self.k}}}")

    def __str__(self) -> str:
        return f"C_b^{{{self.j},{self.k}}}"


@dataclass(frozen=True)
class TestFunctionSpec:
    """A test function ``h`` on the nonnegative half line.

    ``deriv_norms[k]`` is the sup-norm of the k-th derivative (``inf`` when
    unbounded). ``derivative(x, k)`` evaluates derivatives analytically where
    they exist; ``breakpoints`` lists points where a derivative of order at
    most two jumps, so quadrature can split panels there.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    deriv_norms: tuple[float, ...]
    smoothness: SmoothnessClass
    params: tuple[tuple[str, float], ...] = ()
    derivative: Callable[[np.ndarray, int], np.ndarray] | None = None
    limit_at_infinity: float | None = None
    breakpoints: tuple[float, ...] = ()
    ae_second_derivative: bool = False

    def __post_init__(self) -> None:
        if len(self.deriv_norms) != 6:
            raise ValueError("deriv_norms needs entries for orders 0..5")
        for k in range(self.smoothness.j, self.smoothness.k + 1):
            if not math.isfinite(self.deriv_norms[k]):
                raise ValueError(f"{self.name}: norm of order {k} must be finite")

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def norm(self, k: int) -> float:
        return self.deriv_norms[k]

    def in_class(self, j: int, k: int) -> bool:
        """True when every derivative norm of order ``j..k`` is finite."""
        return all(math.isfinite(self.deriv_norms[i]) for i in range(j, k + 1))

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.deriv_norms[0])


def identity_function() -> TestFunctionSpec:
    def deriv(x, k):
        x = np.asarray(x, dtype=float)
        if k == 0:
            return x
        return np.full_like(x, 1.0 if k == 1 else 0.0)

    return TestFunctionSpec(
        name="identity",
        eval=lambda x: np.asarray(x, dtype=float) * 1.0,
        deriv_norms=(INF, 1.0, 0.0, 0.0, 0.0, 0.0),
        smoothness=SmoothnessClass(1, 5),
        derivative=deriv,
    )


def exp_decay() -> TestFunctionSpec:
    def deriv(x, k):
        return (-1.0) ** k * np.exp(-np.asarray(x, dtype=float))

    return TestFunctionSpec(
        name="exp",
        eval=lambda x: np.exp(-np.asarray(x, dtype=float)),
        deriv_norms=(1.0,) * 6,
        smoothness=SmoothnessClass(0, 5),
        derivative=deriv,
        limit_at_infinity=0.0,
    )


def sine(omega: float = 0.5) -> TestFunctionSpec:
    w = float(omega)

    def deriv(x, k):
        return w**k * np.sin(w * np.asarray(x, dtype=float) + k * math.pi / 2)

    return TestFunctionSpec(
        name="sin",
        eval=lambda x: np.sin(w * np.asarray(x, dtype=float)),
        deriv_norms=tuple(w**k for k in range(6)),
        smoothness=SmoothnessClass(0, 5),
        params=(("omega", w),),
        derivative=deriv,
    )


# sup over the real line of |d^k/dx^k 1/(1+e^{-x})|, k = 0..5; the extrema
# are roots of polynomials in the logistic value. Order 4 is
# sqrt(15 - sqrt(105)) * (sqrt(30)/200 + sqrt(14)/120).
LOGISTIC_NORMS = (
    1.0,
    0.25,
    math.sqrt(3.0) / 18.0,
    0.125,
    math.sqrt(15.0 - math.sqrt(105.0)) * (math.sqrt(30.0) / 200.0 + math.sqrt(14.0) / 120.0),
    0.25,
)


def _logistic_polys() -> list[np.polynomial.Polynomial]:
    # d/dx P(sigma) = P'(sigma) * sigma * (1 - sigma)
    P = np.polynomial.Polynomial
    s1ms = P([0.0, 1.0, -1.0])
    polys = [P([0.0, 1.0])]
    for _ in range(5):
        polys.append(polys[-1].deriv() * s1ms)
    return polys


_LOGISTIC_POLYS = _logistic_polys()


def logistic(center: float = 3.0) -> TestFunctionSpec:
    c = float(center)

    def sig(x):
        return 0.5 * (1.0 + np.tanh(0.5 * (np.asarray(x, dtype=float) - c)))

    def deriv(x, k):
        return _LOGISTIC_POLYS[k](sig(x))

    return TestFunctionSpec(
        name="logistic",
        eval=sig,
        deriv_norms=LOGISTIC_NORMS,
        smoothness=SmoothnessClass(0, 5),
        params=(("center", c),),
        derivative=deriv,
        limit_at_infinity=1.0,
    )


def smoothing(z: float = 2.0, alpha: float = 1.0) -> TestFunctionSpec:
    """Quadratic-spline ramp from 1 (for ``x <= z``) down to 0 (for ``x >= z + alpha``).

    ``h'`` is Lipschitz; the second derivative exists almost everywhere and is
    bounded by ``4/alpha**2``.
    """
    z, a = float(z), float(alpha)
    if a <= 0:
        raise ValueError("alpha must be positive")

    def piece(x, k):
        x = np.asarray(x, dtype=float)
        left = x <= z
        up = (x > z) & (x <= z + a / 2)
        down = (x > z + a / 2) & (x <= z + a)
        out = np.zeros_like(x)
        if k == 0:
            out[left] = 1.0
            out[up] = 1.0 - 2.0 * (x[up] - z) ** 2 / a**2
            out[down] = 2.0 * (x[down] - (z + a)) ** 2 / a**2
        elif k == 1:
            out[up] = -4.0 * (x[up] - z) / a**2
            out[down] = 4.0 * (x[down] - (z + a)) / a**2
        elif k == 2:
            out[up] = -4.0 / a**2
            out[down] = 4.0 / a**2
        return out

    return TestFunctionSpec(
        name="smoothing",
        eval=lambda x: piece(x, 0),
        deriv_norms=(1.0, 2.0 / a, 4.0 / a**2, INF, INF, INF),
        smoothness=SmoothnessClass(0, 1),
        params=(("z", z), ("alpha", a)),
        derivative=piece,
        limit_at_infinity=0.0,
        breakpoints=(z, z + a / 2, z + a),
        ae_second_derivative=True,
    )


REGISTRY: Mapping[str, Callable[..., TestFunctionSpec]] = {
    "identity": identity_function,
    "exp": exp_decay,
    "sin": sine,
    "logistic": logistic,
    "smoothing": smoothing,
}


def registry() -> list[TestFunctionSpec]:
    """Default instance of every built-in test function."""
    return [REGISTRY[name]() for name in REGISTRY]


def get_function(name: str) -> TestFunctionSpec:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ParseError(f"unknown test function {name!r}; choose from {sorted(REGISTRY)}") from None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Precondition:
    name: str
    required: str
    actual: float
    satisfied: bool


@dataclass(frozen=True)
class BoundReport:
    """A bound value with its additive terms and the checks it depends on.

    ``value`` is ``inf`` exactly when some precondition fails; otherwise it is
    the correctly rounded sum of ``terms``.
    """

    value: float
    theorem: str
    terms: tuple[tuple[str, float], ...]
    preconditions: tuple[Precondition, ...]

    @property
    def ok(self) -> bool:
        return all(p.satisfied for p in self.preconditions)

    @property
    def term_dict(self) -> dict[str, float]:
        return dict(self.terms)

    def dominant_term(self) -> str:
        if not self.terms:
            return ""
        return max(self.terms, key=lambda kv: kv[1])[0]

    def to_json(self) -> dict:
        return {
            "value": _json_float(self.value),
            "theorem": self.theorem,
            "terms": {k: _json_float(v) for k, v in self.terms},
            "preconditions": [
                {
                    "name": p.name,
                    "required": p.required,
                    "actual": _json_float(p.actual),
                    "satisfied": p.satisfied,
                }
                for p in self.preconditions
            ],
        }


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------


def parse_number(text: str) -> float:
    """Parse a decimal or a fraction such as ``2/3``."""
    t = text.strip()
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        try:
            return float(t)
        except ValueError:
            raise ParseError(f"not a number: {text!r}") from None


def parse_number_list(text: str) -> list[float]:
    parts = [p for p in text.replace(";", ",").replace(" ", ",").split(",") if p.strip()]
    return [parse_number(p) for p in parts]


def read_counts(path: str | Path) -> CountsVector:
    """Read counts from a ``cell,count`` CSV or a JSON array."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
        values = data
    else:
        reader = csv.DictReader(text.splitlines())
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["cell", "count"]:
            raise ParseError(f"{path}: expected header 'cell,count'")
        values = [row["count"] for row in reader]
    counts = []
    for v in values:
        try:
            f = float(v)
        except (TypeError, ValueError):
            raise ParseError(f"{path}: bad count {v!r}") from None
        if not f.is_integer() or f < 0:
            raise ParseError(f"{path}: counts must be nonnegative integers, got {v!r}")
        counts.append(int(f))
    if len(counts) < 2:
        raise ParseError(f"{path}: need at least two cells")
    return CountsVector(tuple(counts))


def read_probs(arg: str) -> list[float]:
    """``arg`` is either a comma-separated list or a path to a file holding one."""
    p = Path(arg)
    if p.exists():
        text = p.read_text()
        if text.lstrip().startswith("["):
            try:
                return [float(v) for v in json.loads(text)]
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ParseError(f"{p}: invalid probability list: {exc}") from None
        lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
        return parse_number_list(",".join(ln for ln in lines if ln.strip()))
    return parse_number_list(arg)


def weighted_total(counts: Sequence[float]) -> float:
    return total(counts)
