"""Chi-square reference law and the exact multinomial oracle.

The oracle enumerates every composition of ``n`` into ``r`` cells. The order
is an odometer on the first ``r - 1`` cells (cell 0 turns fastest, the last
cell takes the remainder), so ``n = 2, r = 2`` gives ``[0, 2], [1, 1], [2, 0]``.
Enumeration is cut into contiguous chunks that depend only on ``(n, r)``;
chunk results are combined in chunk order, which keeps every reduction
bit-for-bit independent of the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import special

from .errors import (
    InfiniteAtomWithoutLimit,
    InvalidCounts,
    NegativeArgument,
    SupportTooLarge,
)
from .model import (
    CountsVector,
    DivergenceIndex,
    MultinomialSpec,
    TestFunctionSpec,
    as_counts,
    as_index,
)
from .quadrature import integrate
from .statistics import statistic_many
from .summation import total

DEFAULT_CAP = 50_000_000
CHUNK_ROWS = 1 << 17
MERGE_RTOL = 1e-12
TAIL_MASS = 1e-16


# ---------------------------------------------------------------------------
# Chi-square reference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChiSquareRef:
    dof: float
    tol: float = 1e-11

    def __post_init__(self) -> None:
        if not (self.dof > 0 and math.isfinite(self.dof)):
            raise ValueError(f"degrees of freedom must be positive, got {self.dof!r}")


def chi2_cdf(ref: ChiSquareRef | float, z: float) -> float:
    """``P(Y <= z)`` for ``Y ~ chi2(dof)``; ``inf`` maps to 1."""
    dof = ref.dof if isinstance(ref, ChiSquareRef) else float(ref)
    if z < 0 or math.isnan(z):
        raise NegativeArgument(f"chi-square CDF needs z >= 0, got {z!r}")
    if z == 0:
        return 0.0
    if math.isinf(z):
        return 1.0
    return float(special.gammainc(dof / 2.0, z / 2.0))


def chi2_cdf_many(dof: float, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = special.gammainc(dof / 2.0, np.where(np.isinf(z), 0.0, z) / 2.0)
    return np.where(np.isinf(z), 1.0, out)


def chi2_pdf(dof: float, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    k2 = dof / 2.0
    with np.errstate(divide="ignore"):
        logp = (k2 - 1.0) * np.log(t) - t / 2.0 - k2 * math.log(2.0) - special.gammaln(k2)
    return np.exp(logp)


def root_weight(dof: float, u: np.ndarray) -> np.ndarray:
    """Density of ``sqrt(Y)``: ``rho(u^2) * 2u``, smooth at the origin for dof >= 1."""
    u = np.asarray(u, dtype=float)
    k2 = dof / 2.0
    with np.errstate(divide="ignore"):
        logw = (dof - 1.0) * np.log(u) - u * u / 2.0 - (k2 - 1.0) * math.log(2.0) - special.gammaln(k2)
    w = np.exp(logw)
    if dof == 1.0:
        w = np.where(u == 0.0, math.exp(-(k2 - 1.0) * math.log(2.0) - special.gammaln(k2)), w)
    return w


def truncation_point(dof: float, mass: float = TAIL_MASS) -> float:
    """``T`` with ``P(Y > T) <= mass`` (and a margin for linear-growth tails)."""
    return float(2.0 * special.gammainccinv(dof / 2.0 + 1.0, mass))


def _expectation_key(h: TestFunctionSpec) -> tuple:
    return (h.name, h.params)


_EXPECTATION_CACHE: dict[tuple, float] = {}


def chi2_expectation(ref: ChiSquareRef | float, h: TestFunctionSpec) -> float:
    """``E[h(Y)]`` by Gauss-Legendre quadrature in ``u = sqrt(t)``.

    The domain is cut where the tail beyond it is below ``1e-16`` in mass
    and in first moment, so the truncation error is at most that times
    ``sup|h|`` (or times the slope for linearly growing ``h``).
    """
    if not isinstance(ref, ChiSquareRef):
        ref = ChiSquareRef(float(ref))
    key = (ref.dof, ref.tol) + _expectation_key(h)
    if key in _EXPECTATION_CACHE:
        return _EXPECTATION_CACHE[key]
    dof = ref.dof
    upper = math.sqrt(truncation_point(dof))
    bps = [math.sqrt(b) for b in h.breakpoints if b > 0]

    def integrand(u):
        return h.eval(u * u) * root_weight(dof, u)

    value, _ = integrate(integrand, 0.0, upper, breakpoints=bps, tol=ref.tol * 1e-2, order=20)
    _EXPECTATION_CACHE[key] = value
    return value


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def support_size(n: int, r: int) -> int:
    return math.comb(n + r - 1, r - 1)


def _check_cap(spec: MultinomialSpec, cap: int | None) -> int:
    cap = DEFAULT_CAP if cap is None else int(cap)
    size = support_size(spec.n, spec.r)
    if size > cap:
        raise SupportTooLarge(f"support has {size} compositions, cap is {cap}")
    return size


@lru_cache(maxsize=64)
def _free_block(m: int, d: int) -> np.ndarray:
    """All length-``d`` vectors with sum <= ``m`` in odometer order (col 0 fastest)."""
    if d == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if d == 1:
        return np.arange(m + 1, dtype=np.int64)[:, None]
    parts = []
    for v in range(m + 1):
        sub = _free_block(m - v, d - 1)
        parts.append(np.hstack([sub, np.full((sub.shape[0], 1), v, dtype=np.int64)]))
    out = np.vstack(parts)
    out.setflags(write=False)
    return out


def _block_size(m: int, d: int) -> int:
    return math.comb(m + d, d)


def _chunk_plan(n: int, r: int, max_rows: int) -> list[tuple[tuple[int, ...], int, int]]:
    """Chunks as ``(fixed outer free coordinates, remaining budget, free dims)``.

    Fixed coordinates are listed outermost first. A chunk covers every free
    vector whose outer coordinates equal the prefix.
    """
    plan: list[tuple[tuple[int, ...], int, int]] = []

    def rec(prefix: tuple[int, ...], m: int, d: int) -> None:
        if d <= 1 or _block_size(m, d) <= max_rows:
            plan.append((prefix, m, d))
            return
        for v in range(m + 1):
            rec(prefix + (v,), m - v, d - 1)

    rec((), n, r - 1)
    return plan


def _materialize(n: int, chunk: tuple[tuple[int, ...], int, int]) -> np.ndarray:
    prefix, m, d = chunk
    free = _free_block(m, d)
    rows = free.shape[0]
    cols = [free]
    if prefix:
        # prefix is outermost-first; columns run innermost-first
        cols.append(np.tile(np.array(prefix[::-1], dtype=np.int64), (rows, 1)))
    body = np.hstack(cols)
    last = n - body.sum(axis=1, keepdims=True)
    return np.hstack([body, last])


def iter_support_chunks(
    spec: MultinomialSpec, cap: int | None = None, max_rows: int = CHUNK_ROWS
) -> Iterator[np.ndarray]:
    """Count matrices covering the support, in enumeration order."""
    _check_cap(spec, cap)
    for chunk in _chunk_plan(spec.n, spec.r, max_rows):
        yield _materialize(spec.n, chunk)


def enumerate_support(spec: MultinomialSpec, cap: int | None = None) -> Iterator[CountsVector]:
    """Stream every composition of ``n`` into ``r`` parts exactly once."""
    for block in iter_support_chunks(spec, cap):
        for row in block.tolist():
            yield CountsVector(tuple(row))


def log_pmf_many(counts: np.ndarray, spec: MultinomialSpec) -> np.ndarray:
    u = np.asarray(counts, dtype=float)
    logp = np.log(spec.p)
    terms = u * logp
    return special.gammaln(spec.n + 1.0) - special.gammaln(u + 1.0).sum(axis=-1) + terms.sum(axis=-1)


def log_pmf(counts, spec: MultinomialSpec) -> float:
    u = as_counts(counts, spec).astype(float)
    return float(
        special.gammaln(spec.n + 1.0)
        - total(special.gammaln(u + 1.0))
        + total(u * np.log(spec.p))
    )


def map_chunks(
    spec: MultinomialSpec,
    fn: Callable[[np.ndarray], object],
    *,
    cap: int | None = None,
    jobs: int = 1,
) -> list:
    """Apply ``fn`` to each support chunk; results come back in chunk order."""
    chunks = iter_support_chunks(spec, cap)
    if jobs <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, chunks))


# ---------------------------------------------------------------------------
# Exact laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactDistribution:
    """Atoms of a discrete law, values strictly increasing."""

    values: np.ndarray
    probs: np.ndarray
    source: str

    def __post_init__(self) -> None:
        self.values.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def total_prob(self) -> float:
        return total(self.probs)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "prob"])
        for v, p in zip(self.values.tolist(), self.probs.tolist()):
            w.writerow([format(v, ".17g"), format(p, ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def distribution_from_atoms(atoms: Sequence[tuple[float, float]], source: str = "atoms") -> ExactDistribution:
    v = np.array([a[0] for a in atoms], dtype=float)
    p = np.array([a[1] for a in atoms], dtype=float)
    return merge_atoms(v, p, source)


def merge_atoms(values: np.ndarray, probs: np.ndarray, source: str) -> ExactDistribution:
    """Sort by value and merge neighbours closer than ``1e-12`` relative."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(values, kind="stable")
    v, p = values[order], probs[order]
    keep = p > 0
    if not np.any(keep):
        raise InvalidCounts("distribution has no atoms")
    v, p = _merge_groups_fast(v[keep], p[keep])
    return ExactDistribution(v, p, source)


def _merge_groups_fast(v: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # a new group starts where the gap to the previous value exceeds the
    # tolerance; the group keeps its smallest value
    with np.errstate(invalid="ignore"):
        gap = np.diff(v)
        same = (v[1:] == v[:-1]) | (np.isfinite(v[1:]) & (gap <= MERGE_RTOL * np.abs(v[1:])))
    new = ~same
    idx = np.concatenate([[0], np.nonzero(new)[0] + 1])
    return v[idx].copy(), np.add.reduceat(p, idx)


def exact_distribution(
    spec: MultinomialSpec,
    idx: DivergenceIndex | float,
    *,
    cap: int | None = None,
    jobs: int = 1,
) -> ExactDistribution:
    """Exact law of ``T_lam`` under the null (``lam = -1`` gives ``GM^2``)."""
    lam = as_index(idx).lam

    def work(block: np.ndarray):
        vals = statistic_many(block, spec, lam)
        probs = np.exp(log_pmf_many(block, spec))
        return vals, probs

    parts = map_chunks(spec, work, cap=cap, jobs=jobs)
    values = np.concatenate([a for a, _ in parts])
    probs = np.concatenate([b for _, b in parts])
    return merge_atoms(values, probs, f"T[{lam:.17g}] {spec.label()}")


def exact_expectation(dist: ExactDistribution, h: TestFunctionSpec | Callable) -> float:
    """``E[h(T)]`` over the atoms with correctly rounded summation."""
    v = dist.values
    fin = np.isfinite(v)
    hv = np.empty_like(v)
    fn = h.eval if isinstance(h, TestFunctionSpec) else h
    hv[fin] = np.asarray(fn(v[fin]), dtype=float)
    if not np.all(fin):
        lim = h.limit_at_infinity if isinstance(h, TestFunctionSpec) else None
        if lim is None:
            raise InfiniteAtomWithoutLimit(f"{dist.source}: infinite atom and h has no limit at infinity")
        hv[~fin] = lim
    return total(hv * dist.probs)


def exact_kolmogorov(dist: ExactDistribution, ref: ChiSquareRef | float) -> float:
    """``sup_z |P(T <= z) - P(Y <= z)|`` computed exactly over the atoms."""
    dof = ref.dof if isinstance(ref, ChiSquareRef) else float(ref)
    v = dist.values
    fin = np.isfinite(v)
    after = np.cumsum(dist.probs)
    before = after - dist.probs
    fc = chi2_cdf_many(dof, np.where(fin, v, 0.0))
    up = np.where(fin, after - fc, 0.0)
    down = np.where(fin, fc - before, 0.0)
    best = float(max(up.max(initial=0.0), down.max(initial=0.0)))
    if not np.all(fin):
        # mass at +inf: the gap as z -> inf equals that mass
        best = max(best, total(dist.probs[~fin]))
    return min(max(best, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Exact moments
# ---------------------------------------------------------------------------


def binomial_weights(n: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    u = np.arange(n + 1, dtype=float)
    logw = (
        special.gammaln(n + 1.0)
        - special.gammaln(u + 1.0)
        - special.gammaln(n - u + 1.0)
        + special.xlogy(u, p)
        + special.xlog1py(n - u, -p)
    )
    return u, np.exp(logw)


def _parse_kind(kind) -> tuple[str, float]:
    if isinstance(kind, tuple):
        name, k = kind
        return str(name), float(k)
    text = str(kind)
    if text.startswith("raw"):
        arg = text[3:].strip("():= ")
        return "raw", float(arg)
    return text, 0.0


def exact_binomial_moment(n: int, p: float, kind) -> float:
    """Exact moment of ``S = (U - np)/sqrt(np)`` or, for ``raw(k)``, of ``U``.

    ``kind`` is ``"abs3"``, ``"central4"``, ``"central6"``, ``("raw", k)`` or
    ``"raw(k)"``; ``k`` may be non-integer.
    """
    if n < 1 or not (0.0 < p < 1.0):
        raise ValueError(f"need n >= 1 and 0 < p < 1, got n={n}, p={p}")
    name, k = _parse_kind(kind)
    u, w = binomial_weights(int(n), float(p))
    mu = n * p
    s = (u - mu) / math.sqrt(mu)
    if name == "abs3":
        vals = np.abs(s) ** 3
    elif name == "central4":
        vals = s**4
    elif name == "central6":
        vals = s**6
    elif name == "raw":
        if not k > 0:
            raise ValueError("raw moment order must be positive")
        vals = np.where(u == 0, 0.0, u**k)
    else:
        raise ValueError(f"unknown moment kind {kind!r}")
    return total(vals * w)


def _check_pair(spec: MultinomialSpec, j: int, k: int) -> None:
    r = spec.r
    if not (0 <= j < r and 0 <= k < r):
        raise IndexError(f"cell indices must lie in [0, {r}), got {j}, {k}")
    if j == k:
        raise ValueError("cross moment needs two distinct cells")


def exact_cross_moment(spec: MultinomialSpec, j: int, k: int, *, method: str = "marginal", cap: int | None = None) -> float:
    """Exact ``E[S_j^3 S_k^3]`` (0-based cell indices).

    ``method="marginal"`` sums over the law of ``(U_j, U_k)``, which is
    trinomial (binomial when ``r = 2``); ``method="full"`` enumerates the whole
    multinomial support and serves as the independent check.
    """
    _check_pair(spec, j, k)
    n = spec.n
    pj, pk = spec.probs[j], spec.probs[k]
    aj, ak = n * pj, n * pk
    if method == "full":
        _check_cap(spec, cap)

        def work(block):
            w = np.exp(log_pmf_many(block, spec))
            sj = (block[:, j] - aj) / math.sqrt(aj)
            sk = (block[:, k] - ak) / math.sqrt(ak)
            return (sj**3) * (sk**3) * w

        parts = map_chunks(spec, work, cap=cap)
        return total(np.concatenate(parts))
    if method != "marginal":
        raise ValueError(f"unknown method {method!r}")
    if spec.r == 2:
        u, w = binomial_weights(n, pj)
        sj = (u - aj) / math.sqrt(aj)
        sk = ((n - u) - ak) / math.sqrt(ak)
        return total((sj**3) * (sk**3) * w)
    rest = max(1.0 - pj - pk, 0.0)
    a = np.arange(n + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    ok = A + B <= n
    A, B = A[ok].astype(float), B[ok].astype(float)
    C = n - A - B
    logw = (
        special.gammaln(n + 1.0)
        - special.gammaln(A + 1.0)
        - special.gammaln(B + 1.0)
        - special.gammaln(C + 1.0)
        + A * math.log(pj)
        + B * math.log(pk)
        + special.xlogy(C, rest)
    )
    w = np.exp(logw)
    sj = (A - aj) / math.sqrt(aj)
    sk = (B - ak) / math.sqrt(ak)
    return total((sj**3) * (sk**3) * w)
