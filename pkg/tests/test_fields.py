import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvfunc import (MetricError, MetricField, ScalarField, SymTensorField, build_torus_grid,
                      integrate, normalize_volume, partial_derivative, pointwise_inner,
                      project_constants, random_function, round_sphere_chart,
                      scalar_curvature, trace, trace_free_part)
from curvfunc.models import random_symmetric_tensor
from conftest import flat_metric


def test_constant_derivative_is_zero(unit_t2):
    f = ScalarField(unit_t2, np.full((1, 1), 3.0))
    assert np.all(partial_derivative(f, 0).values == 0)


def test_sine_derivative(unit_t2, sin_field):
    f = sin_field(unit_t2)
    x = unit_t2.coordinates()[0]
    d = partial_derivative(f, 0).values
    assert np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x))) < 1e-3


def test_integrate_examples(unit_t2, sin_field):
    g = flat_metric(unit_t2)
    one = ScalarField(unit_t2, np.ones((1, 1)))
    assert integrate(one, g) == pytest.approx(1.0, abs=1e-14)
    assert abs(integrate(sin_field(unit_t2), g)) < 1e-12
    s2 = round_sphere_chart(2, 1.0, 64).metric
    assert abs(integrate(ScalarField(s2.chart, np.ones((1, 1))), s2) - 4 * np.pi) < 1e-8


def test_scalar_field_rejects_nonfinite(unit_t2):
    with pytest.raises(ValueError):
        ScalarField(unit_t2, np.full((1, 1), np.nan))


def test_spd_violation():
    ch = build_torus_grid(2, 16)
    full = np.zeros((2, 2, 1, 1))
    full[0, 0], full[1, 1] = 1.0, -1.0
    with pytest.raises(MetricError):
        MetricField.from_full(ch, full)


def test_inverse_is_accurate(perturbed_t3):
    g = perturbed_t3
    eye = np.einsum("ij...,jk...->ik...", g.g, g.ginv)
    target = np.eye(3).reshape(3, 3, 1, 1, 1)
    assert np.max(np.abs(eye - target)) < 1e-12


def test_volume_is_quadrature_of_density(perturbed_t3):
    g = perturbed_t3
    assert g.volume == pytest.approx(g.chart.quad(g.density), rel=1e-14)


def test_pointwise_inner(perturbed_t3):
    g = perturbed_t3
    gg = pointwise_inner(g.tensor, g.tensor, g).values
    assert np.max(np.abs(gg - 3)) < 1e-12
    h = random_symmetric_tensor(g.chart, 1.0, 2, 1)
    k = random_symmetric_tensor(g.chart, 1.0, 2, 2)
    assert np.max(np.abs(pointwise_inner(g.tensor, h, g).values - trace(h, g).values)) < 1e-12
    assert np.max(np.abs(pointwise_inner(h, k, g).values
                         - pointwise_inner(k, h, g).values)) < 1e-14


def test_trace_free_part(unit_t2, perturbed_t3):
    g = flat_metric(unit_t2)
    assert np.max(np.abs(trace_free_part(g.tensor, g).values)) == 0
    h = SymTensorField.from_full(unit_t2, np.array([[1.0, 0.0], [0.0, -1.0]]).reshape(2, 2, 1, 1))
    assert np.allclose(trace_free_part(h, g).values, h.values)
    g = perturbed_t3
    h = random_symmetric_tensor(g.chart, 1.0, 2, 3)
    z = trace_free_part(h, g)
    assert np.max(np.abs(trace(z, g).values)) < 1e-12
    assert np.max(np.abs(trace_free_part(z, g).values - z.values)) < 1e-12


def test_project_constants(unit_t2, sin_field, perturbed_t3):
    g = flat_metric(unit_t2)
    assert project_constants(ScalarField(unit_t2, np.full((1, 1), 5.0)), g) == pytest.approx(5)
    assert abs(project_constants(sin_field(unit_t2), g)) < 1e-14
    g = perturbed_t3
    f = random_function(g.chart, 1.0, 2, 4) + 0.3
    p = project_constants(f, g)
    assert project_constants(ScalarField(g.chart, np.full((1, 1, 1), p)), g) == pytest.approx(p)
    assert project_constants(2 * f, g) == pytest.approx(2 * p)
    s = scalar_curvature(g)
    assert project_constants(s * s, g) >= project_constants(s, g) ** 2


def test_normalize_volume(perturbed_t3):
    ch = build_torus_grid(2, 16, (2.0, 1.0))
    g = normalize_volume(flat_metric(ch))
    assert g.volume == pytest.approx(1.0, abs=1e-12)
    g2 = normalize_volume(g)
    assert np.max(np.abs(g2.tensor.values - g.tensor.values)) < 1e-14
    # s scales by Vol^(2/n)
    g = perturbed_t3
    gn = normalize_volume(g)
    ratio = g.volume ** (2 / 3)
    s, sn = scalar_curvature(g).values, scalar_curvature(gn).values
    assert np.max(np.abs(sn - ratio * s)) < 1e-10 * max(1, np.max(np.abs(s)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_decomposition_identity(seed):
    g = flat_metric(build_torus_grid(2, 16, order="spectral"))
    h = random_symmetric_tensor(g.chart, 1.0, 2, seed)
    k = random_symmetric_tensor(g.chart, 1.0, 2, seed + 1)
    lhs = pointwise_inner(h, k, g).values
    rhs = (trace(h, g) * trace(k, g)).values / 2 + pointwise_inner(
        trace_free_part(h, g), trace_free_part(k, g), g).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    rebuilt = trace_free_part(h, g).values + (trace(h, g).values / 2) * g.tensor.values
    assert np.max(np.abs(rebuilt - h.values)) < 1e-12
