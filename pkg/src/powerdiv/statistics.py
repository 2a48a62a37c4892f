"""The power divergence family and its named members.

Every statistic is written as a sum of nonnegative per-cell terms. For the
generic index the cell term is

    2/(lam+1) * [U * expm1(lam * l) / lam - (U - a)],   l = log(U / a),  a = n p,

which equals the textbook form after adding ``sum_j (U_j - a_j) = 0``. The
bracket is a convex remainder, so rounding never drives a cell negative and
``U = 0`` reduces to the exact value ``2 a / (lam + 1)``.
"""

from __future__ import annotations

import numpy as np

from .errors import IndexOutOfRange
from .model import DivergenceIndex, MultinomialSpec, as_counts, as_index
from .summation import neumaier_rows, total

# Below these distances the prefactor 2/(lam(lam+1)) is too ill-conditioned
# and the analytic limits are used instead.
ZERO_SWITCH = 1e-7
MINUS_ONE_SWITCH = 1e-7


def _log_ratio(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    # log1p keeps full relative precision when U is close to its expectation
    with np.errstate(divide="ignore"):
        return np.log1p((u - a) / a)


def _cells_generic(u: np.ndarray, a: np.ndarray, lam: float) -> np.ndarray:
    ell = _log_ratio(u, a)
    with np.errstate(invalid="ignore", over="ignore"):
        inner = u * np.expm1(lam * ell) / lam - (u - a)
    inner = np.where(u == 0, a, inner)
    return np.maximum(2.0 / (lam + 1.0) * inner, 0.0)


def _cells_lr(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    ell = _log_ratio(u, a)
    with np.errstate(invalid="ignore"):
        inner = u * ell - (u - a)
    inner = np.where(u == 0, a, inner)
    return np.maximum(2.0 * inner, 0.0)


def _cells_modified_lr(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    ell = _log_ratio(u, a)
    inner = -a * ell + (u - a)
    inner = np.where(u == 0, np.inf, inner)
    return np.maximum(2.0 * inner, 0.0)


def _cells_pearson(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    d = u - a
    return d * d / a


def _cells_freeman_tukey(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    d = np.sqrt(u) - np.sqrt(a)
    return 4.0 * d * d


def cell_terms(u: np.ndarray, spec: MultinomialSpec, lam: float) -> np.ndarray:
    """Per-cell contributions for counts ``u`` (any leading shape, last axis = cells).

    ``lam = -1`` gives the modified likelihood ratio terms (``inf`` on empty
    cells). No validation is done here; callers check counts first.
    """
    u = np.asarray(u, dtype=float)
    a = spec.expected
    if lam < -1.0:
        raise IndexOutOfRange(f"lambda must be >= -1, got {lam!r}")
    if lam == 1.0:
        return _cells_pearson(u, a)
    if lam == -0.5:
        return _cells_freeman_tukey(u, a)
    if abs(lam) < ZERO_SWITCH:
        return _cells_lr(u, a)
    if lam + 1.0 < MINUS_ONE_SWITCH:
        return _cells_modified_lr(u, a)
    return _cells_generic(u, a, lam)


def statistic_many(counts: np.ndarray, spec: MultinomialSpec, lam: float) -> np.ndarray:
    """Evaluate ``T_lam`` for each row of an integer count matrix (unchecked)."""
    return neumaier_rows(cell_terms(counts, spec, lam))


def _checked_lambda(idx: DivergenceIndex | float) -> float:
    lam = as_index(idx).lam
    if lam <= -1.0:
        raise IndexOutOfRange(f"power_divergence needs lambda > -1, got {lam!r}")
    return lam


def power_divergence(counts, spec: MultinomialSpec, idx: DivergenceIndex | float) -> float:
    """``T_lam`` for one count vector; ``lam = 0`` gives the likelihood ratio ``L``."""
    lam = _checked_lambda(idx)
    u = as_counts(counts, spec)
    return total(cell_terms(u, spec, lam))


def likelihood_ratio(counts, spec: MultinomialSpec) -> float:
    u = as_counts(counts, spec)
    return total(_cells_lr(u.astype(float), spec.expected))


def pearson(counts, spec: MultinomialSpec) -> float:
    u = as_counts(counts, spec)
    return total(_cells_pearson(u.astype(float), spec.expected))


def freeman_tukey(counts, spec: MultinomialSpec) -> float:
    u = as_counts(counts, spec)
    return total(_cells_freeman_tukey(u.astype(float), spec.expected))


def modified_lr(counts, spec: MultinomialSpec) -> float:
    """``GM^2``; ``inf`` as soon as one cell is empty."""
    u = as_counts(counts, spec)
    if np.any(u == 0):
        return float("inf")
    return total(_cells_modified_lr(u.astype(float), spec.expected))


def statistic(counts, spec: MultinomialSpec, lam: float) -> float:
    """Like :func:`power_divergence` but also accepts ``lam = -1``."""
    if as_index(lam).lam == -1.0:
        return modified_lr(counts, spec)
    return power_divergence(counts, spec, lam)
