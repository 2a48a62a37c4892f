"""Compensated summation helpers.

One-dimensional totals go through :func:`math.fsum` (correctly rounded).
Row-wise sums over a small trailing axis, as needed when a statistic is
evaluated for many count vectors at once, use vectorised Kahan-Neumaier.
"""

from __future__ import annotations

import math

import numpy as np


def total(values) -> float:
    """Correctly rounded sum of a 1-D sequence or array."""
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum(arr.tolist())


def neumaier_rows(values: np.ndarray) -> np.ndarray:
    """Sum ``values`` along its last axis with Neumaier compensation."""
    values = np.asarray(values, dtype=float)
    s = np.zeros(values.shape[:-1])
    comp = np.zeros_like(s)
    with np.errstate(invalid="ignore"):
        for j in range(values.shape[-1]):
            v = values[..., j]
            t = s + v
            big = np.abs(s) >= np.abs(v)
            comp += np.where(big, (s - t) + v, (v - t) + s)
            s = t
        out = s + comp
    # inf - inf in the compensation term would otherwise turn +inf into nan
    return np.where(np.isfinite(s), out, s)


def dot(weights, values) -> float:
    """Correctly rounded sum of ``weights * values`` (products rounded once)."""
    w = np.asarray(weights, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    return total(w * v)
