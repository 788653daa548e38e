import numpy as np
import pytest

from vemschwarz.mesh import generate_cubic_mesh, generate_hexprism_mesh, generate_voronoi_mesh


@pytest.fixture(scope="session")
def cube4():
    return generate_cubic_mesh(4)


@pytest.fixture(scope="session")
def cube8():
    return generate_cubic_mesh(8)


@pytest.fixture(scope="session")
def voronoi4():
    return generate_voronoi_mesh(4, jitter=0.3, rng_seed=1)


@pytest.fixture(scope="session")
def hexprism34():
    return generate_hexprism_mesh(3, 4)


@pytest.fixture(scope="session")
def small_meshes(cube4, voronoi4, hexprism34):
    return {"cubes": cube4, "voronoi": voronoi4, "hexprism": hexprism34}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
