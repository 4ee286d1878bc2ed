import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from penlangevin import default_domain
from penlangevin.geometry import PolygonDomain

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def square():
    return PolygonDomain(UNIT_SQUARE)


@pytest.fixture(scope="session")
def domain():
    return default_domain()


@st.composite
def star_polygons(draw, min_vertices=3, max_vertices=12):
    """Random star-shaped (hence simple) polygons around the origin."""
    n = draw(st.integers(min_vertices, max_vertices))
    # every angular gap stays below pi, which keeps the polygon simple
    gaps = np.array(draw(st.lists(st.floats(0.6, 1.0), min_size=n, max_size=n)))
    radii = draw(st.lists(st.floats(0.3, 3.0), min_size=n, max_size=n))
    ang = draw(st.floats(0, 2 * np.pi)) + 2 * np.pi * np.cumsum(gaps) / gaps.sum()
    v = np.column_stack([np.array(radii) * np.cos(ang), np.array(radii) * np.sin(ang)])
    return PolygonDomain(v)


points = st.tuples(st.floats(-5, 5), st.floats(-5, 5)).map(np.array)


# --- acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    def record(label, passed, detail, elapsed=None, budget=None):
        if budget is not None and elapsed is not None:
            detail = f"{detail}; {elapsed:.1f}s of {budget:.0f}s"
            passed = passed and elapsed < budget
        line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
