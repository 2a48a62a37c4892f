from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powerdiv.errors import CountSumMismatch, IndexOutOfRange
from powerdiv.model import make_spec
from powerdiv.statistics import (
    freeman_tukey,
    likelihood_ratio,
    modified_lr,
    pearson,
    power_divergence,
    statistic,
    statistic_many,
)

from .conftest import compositions

mp.mp.dps = 40


def oracle(counts, probs, lam) -> float:
    """Direct high-precision evaluation of the defining sums."""
    n = sum(counts)
    lam = mp.mpf(lam)
    tot = mp.mpf(0)
    for u, p in zip(counts, probs):
        e = n * mp.mpf(p)
        if lam == 0:
            tot += 0 if u == 0 else 2 * u * mp.log(u / e)
        elif lam == -1:
            if u == 0:
                return math.inf
            tot += 2 * e * mp.log(e / u)
        else:
            tot += 2 / (lam * (lam + 1)) * (mp.mpf(u) ** (lam + 1) / e**lam - u)
    if lam not in (0, -1):
        tot = 2 / (lam * (lam + 1)) * (sum(mp.mpf(u) ** (lam + 1) / (n * mp.mpf(p)) ** lam for u, p in zip(counts, probs)) - n)
    return float(tot)


@pytest.mark.parametrize(
    "counts, lam, expected",
    [
        ([2, 2], 1.0, 0.0),
        ([3, 1], 1.0, 1.0),
        ([4, 0], 1.0, 4.0),
        ([3, 1], 0.0, 6 * math.log(1.5) + 2 * math.log(0.5)),
        ([4, 0], -0.5, -8 * (math.sqrt(8) - 4)),
        ([3, 1], -1.0, 8 * (0.5 * math.log(2 / 3) + 0.5 * math.log(2))),
    ],
)
def test_hand_examples(half_spec, counts, lam, expected):
    assert statistic(counts, half_spec, lam) == pytest.approx(expected, rel=1e-13, abs=1e-15)


def test_freeman_tukey_hand_formula(half_spec):
    # 4[(sqrt3 - sqrt2)^2 + (1 - sqrt2)^2]
    want = 4 * ((math.sqrt(3) - math.sqrt(2)) ** 2 + (1 - math.sqrt(2)) ** 2)
    assert freeman_tukey([3, 1], half_spec) == pytest.approx(want, rel=1e-14)
    assert freeman_tukey([4, 0], half_spec) == pytest.approx(4 * ((2 - math.sqrt(2)) ** 2 + 2), rel=1e-14)


def test_named_statistics(half_spec):
    assert pearson([3, 1], half_spec) == 1.0
    assert likelihood_ratio([2, 2], half_spec) == 0.0
    assert modified_lr([4, 0], half_spec) == math.inf
    assert modified_lr([2, 2], half_spec) == 0.0


def test_power_divergence_rejects_minus_one_and_below(half_spec):
    with pytest.raises(IndexOutOfRange):
        power_divergence([3, 1], half_spec, -1.0)
    with pytest.raises(IndexOutOfRange):
        statistic([3, 1], half_spec, -2.0)
    with pytest.raises(CountSumMismatch):
        pearson([3, 2], half_spec)


@pytest.mark.parametrize("lam", [-0.9, -0.5, -1e-6, 0.0, 1e-6, 2 / 3, 1.0, 1.5, 2.0, 3.5, 7.0])
def test_matches_high_precision_oracle(lam):
    spec = make_spec(9, [0.2, 0.3, 0.5])
    for c in compositions(9, 3):
        want = oracle(c, spec.probs, lam)
        assert statistic(c, spec, lam) == pytest.approx(want, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("lam", [-1e-9, 1e-9, -1 + 1e-9])
def test_limit_regimes_within_switch_error(lam):
    # |lam| < 1e-7 routes to L and lam + 1 < 1e-7 to GM^2; the routing error is O(lam)
    spec = make_spec(9, [0.2, 0.3, 0.5])
    for c in compositions(9, 3):
        if lam < -0.5 and 0 in c:
            continue
        want = oracle(c, spec.probs, lam)
        assert statistic(c, spec, lam) == pytest.approx(want, rel=1e-6)


def test_modified_lr_oracle():
    spec = make_spec(7, [0.2, 0.3, 0.5])
    for c in compositions(7, 3):
        want = oracle(c, spec.probs, -1)
        got = modified_lr(c, spec)
        if math.isinf(want):
            assert got == math.inf
        else:
            assert got == pytest.approx(want, rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("lam", [-0.5, 0.0, 2 / 3, 1.0, 2.0])
def test_nonnegative_and_zero_only_at_expected(lam):
    spec = make_spec(12, [0.25, 0.25, 0.5])
    for c in compositions(12, 3):
        v = statistic(c, spec, lam)
        assert v >= 0.0
        if c == (3, 3, 6):
            assert v == 0.0
        else:
            assert v > 0.0


def test_continuity_at_zero():
    for n, probs in [(30, [0.5, 0.5]), (20, [0.2, 0.3, 0.5]), (14, [0.1, 0.2, 0.3, 0.4])]:
        spec = make_spec(n, probs)
        block = np.array(list(compositions(n, spec.r)))
        a = statistic_many(block, spec, 1e-8)
        b = statistic_many(block, spec, 0.0)
        assert np.max(np.abs(a - b)) <= 1e-6


def test_special_cases_agree_over_enumeration():
    spec = make_spec(30, [0.3, 0.3, 0.4])
    for c in compositions(30, 3):
        assert abs(power_divergence(c, spec, 1.0) - pearson(c, spec)) <= 1e-12
        assert abs(power_divergence(c, spec, -0.5) - freeman_tukey(c, spec)) <= 1e-10


@given(
    st.lists(st.integers(0, 20), min_size=2, max_size=5).filter(lambda c: sum(c) > 0),
    st.sampled_from([-0.5, 0.0, 2 / 3, 1.0, 2.5]),
    st.randoms(use_true_random=False),
)
def test_permutation_equivariance(counts, lam, rnd):
    r = len(counts)
    w = [rnd.uniform(0.1, 1.0) for _ in range(r)]
    s = sum(w)
    probs = [x / s for x in w]
    perm = list(range(r))
    rnd.shuffle(perm)
    a = statistic(counts, make_spec(sum(counts), probs), lam)
    b = statistic([counts[i] for i in perm], make_spec(sum(counts), [probs[i] for i in perm]), lam)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(st.integers(1, 60), st.floats(0.05, 0.95), st.floats(-0.95, 6.0).filter(lambda x: abs(x) > 1e-6))
def test_binary_oracle_property(n, p, lam):
    spec = make_spec(n, [p, 1 - p])
    u = n // 3
    want = oracle((u, n - u), spec.probs, lam)
    assert statistic([u, n - u], spec, lam) == pytest.approx(want, rel=1e-9, abs=1e-11)
