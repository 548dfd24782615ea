import numpy as np
import pytest

from curvfunc import MetricField, ScalarField, build_torus_grid, flat_torus, random_perturbation


def flat_metric(chart):
    full = np.zeros((chart.n, chart.n) + (1,) * chart.n)
    for i in range(chart.n):
        full[i, i] = 1.0
    return MetricField.from_full(chart, full)


@pytest.fixture(scope="session")
def perturbed_t3():
    g0 = flat_torus(3, None, 24, "spectral").metric
    return random_perturbation(g0, 0.05, 2, 42)


@pytest.fixture(scope="session")
def perturbed_t2():
    g0 = flat_torus(2, None, 32, "spectral").metric
    return random_perturbation(g0, 0.05, 2, 7)


@pytest.fixture
def sin_field():
    def make(chart, k=1, axis=0):
        x = chart.coordinates()[axis]
        return ScalarField(chart, np.sin(2 * np.pi * k * x / chart.extents[axis]))
    return make


@pytest.fixture
def unit_t2():
    return build_torus_grid(2, 32, (1.0, 1.0))



def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
