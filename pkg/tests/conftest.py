from __future__ import annotations

import itertools

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def compositions(n: int, r: int):
    """All compositions of ``n`` into ``r`` parts, by brute force (test oracle)."""
    for cut in itertools.combinations(range(n + r - 1), r - 1):
        prev = -1
        parts = []
        for c in cut:
            parts.append(c - prev - 1)
            prev = c
        parts.append(n + r - 2 - prev)
        yield tuple(parts)


@pytest.fixture
def half_spec():
    from powerdiv.model import make_spec

    return make_spec(4, [0.5, 0.5])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
