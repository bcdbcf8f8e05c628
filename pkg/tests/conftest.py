from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from glauber_lab.graphs import Graph

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

LAMBDAS = (Fraction(1, 2), Fraction(1), Fraction(2))


@st.composite
def small_graphs(draw, min_n=1, max_n=6, connected=False):
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    g = Graph.from_edges(n, [p for p, k in zip(pairs, keep) if k])
    if connected and not g.is_connected():
        # chain the components together so the graph stays random but connected
        comps = g.components()
        extra = [(min(a[0], b[0]), max(a[0], b[0])) for a, b in zip(comps, comps[1:])]
        g = Graph.from_edges(n, list(g.edges) + extra)
    return g


rationals = st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5)])


@pytest.fixture
def k2():
    return Graph.complete(2)


@pytest.fixture
def k3():
    return Graph.complete(3)


@pytest.fixture
def p3():
    return Graph.path(3)


# one summary line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
