import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gwprune.offspring import FiniteSupport, Geometric
from gwprune.tree import FiniteTree

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def binary():
    return FiniteSupport((0.5, 0.0, 0.5))


@pytest.fixture
def geom():
    return Geometric.critical(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


nested_trees = st.recursive(st.just([]), lambda ch: st.lists(ch, min_size=1, max_size=4), max_leaves=40)
trees = nested_trees.map(FiniteTree.from_nested)


@st.composite
def finite_laws(draw, max_k=6, critical=False):
    """Random finite offspring laws with mass on some k >= 2 and p1 < 1."""
    k = draw(st.integers(2, max_k))
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=k + 1, max_size=k + 1))
    w[k] = max(w[k], 0.05)
    w[0] = max(w[0], 0.05)
    w = np.asarray(w) / sum(w)
    if critical:
        # tilt p0 against the top coefficient until the mean is 1
        mean = float(np.dot(np.arange(k + 1), w))
        if mean < 1.0:
            # move mass from p0 to p_k
            t = (1.0 - mean) / k
            if t > w[0]:
                return draw(finite_laws(max_k, critical))
            w[0] -= t
            w[k] += t
        else:
            # mix with a point mass at 0
            lam = 1.0 / mean
            w = lam * w
            w[0] += 1.0 - lam
    return FiniteSupport(tuple(float(x) for x in w))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
