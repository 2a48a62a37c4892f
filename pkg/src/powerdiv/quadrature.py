"""Composite Gauss-Legendre rules.

Panels are refined by doubling until two successive estimates agree; every
rule is deterministic, so the same integrand always produces the same bits.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .errors import QuadratureFailure


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[-1, 1]`` (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for panels given by ``edges`` along the last axis.

    ``edges`` has shape ``(..., P + 1)`` and must be nondecreasing; a panel of
    zero width simply gets zero weights, which lets callers pad ragged panel
    lists to a common length. Returns arrays of shape ``(..., P * order)``.
    """
    t, w = gauss_legendre(order)
    left = edges[..., :-1, None]
    half = 0.5 * (edges[..., 1:, None] - left)
    nodes = left + half * (t + 1.0)
    weights = half * w
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def merge_edges(a: float, b: float, breakpoints: Iterable[float], panels: int) -> np.ndarray:
    """Uniform edges on ``[a, b]`` with interior breakpoints inserted."""
    base = np.linspace(a, b, panels + 1)
    extra = [float(c) for c in breakpoints if a < c < b]
    return np.unique(np.concatenate([base, extra])) if extra else base


def integrate(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    breakpoints: Iterable[float] = (),
    tol: float = 1e-12,
    order: int = 20,
    start_panels: int = 4,
    max_panels: int = 8192,
) -> tuple[float, float]:
    """Integrate a vectorised ``func`` over ``[a, b]``.

    Returns ``(value, error_estimate)`` where the estimate is the change from
    the previous doubling. Raises :class:`QuadratureFailure` if ``tol`` is not
    reached before ``max_panels``.
    """
    bps = tuple(breakpoints)
    panels = start_panels
    prev = None
    while panels <= max_panels:
        edges = merge_edges(a, b, bps, panels)
        nodes, weights = panel_nodes(edges, order)
        vals = np.asarray(func(nodes), dtype=float)
        est = float(np.sum(vals * weights))
        if not np.isfinite(est):
            raise QuadratureFailure(f"non-finite integrand on [{a}, {b}]")
        if prev is not None:
            err = abs(est - prev)
            if err <= tol:
                return est, err
        prev = est
        panels *= 2
    raise QuadratureFailure(f"tolerance {tol:g} not reached on [{a}, {b}] with {max_panels} panels")
