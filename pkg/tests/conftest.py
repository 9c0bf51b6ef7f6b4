import sys

import pytest

from kompaneets import build_geometric_mesh, canonical_mesh


@pytest.fixture(scope="session")
def canon():
    return canonical_mesh()


@pytest.fixture(scope="session")
def small_mesh():
    return build_geometric_mesh(200, 30.0, 0.5)


@pytest.fixture(scope="session")
def mid_mesh():
    return build_geometric_mesh(1000, 30.0, 0.1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
