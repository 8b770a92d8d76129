"""Shared fixtures: problem data and expansions that several test modules reuse."""

from __future__ import annotations

import sys
from fractions import Fraction

import numpy as np
import pytest

from vvlab.hierarchy import build_hierarchy
from vvlab.problem import make_spec


def rate(sizes, errors) -> float:
    """Observed order from errors at successive refinements (least squares in log-log)."""
    return float(-np.polyfit(np.log(sizes), np.log(errors), 1)[0])


@pytest.fixture(scope="session")
def spec01():
    return make_spec(1.0, 0.1, [(1, 1.0, 0.0)])


@pytest.fixture(scope="session")
def hier2(spec01):
    """Expansion up to order 2 for alpha = 1, delta = 0.1, f = cos x."""
    return build_hierarchy(spec01, 2)


@pytest.fixture(scope="session")
def hier_by_delta():
    """Order-2 expansions for the three delta values of the invariant suites."""
    return {d: build_hierarchy(make_spec(1.0, d, [(1, 1.0, 0.0)]), 2) for d in (0.05, 0.1, 0.2)}


@pytest.fixture(scope="session")
def couette_hier():
    return build_hierarchy(make_spec(1.0, 0.0, [(1, 1.0, 0.0)]), 2)


@pytest.fixture
def F():
    return Fraction


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
