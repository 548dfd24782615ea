import numpy as np
import pytest

from curvfunc import (ConfigError, MetricError, PreconditionError, ScalarField, conformal_deform,
                      critical_residual, flat_torus, from_descriptor, laplacian, product_spheres,
                      random_function, random_perturbation, round_sphere_chart, scalar_curvature)
from curvfunc.models import product_oracle


def test_flat_torus_examples():
    m = flat_torus(2, (1, 1), 32)
    assert m.metric.volume == pytest.approx(1.0)
    assert np.all(scalar_curvature(m.metric).values == 0)
    assert flat_torus(3, (1, 2, 3), 16).metric.volume == pytest.approx(6.0)
    assert critical_residual(m.metric) == 0.0
    assert m.oracle.einstein and m.oracle.scalar_flat


def test_sphere_examples():
    m = round_sphere_chart(2, 1.0, 64)
    assert m.scalar_curvature_error() < 1e-4
    assert m.metric.volume == pytest.approx(4 * np.pi, rel=1e-8)
    m3 = round_sphere_chart(3, 1.0, 48)
    assert m3.scalar_curvature_error() < 1e-4
    assert m3.metric.volume == pytest.approx(2 * np.pi**2, rel=1e-8)
    m = round_sphere_chart(2, 2.0, 64)
    assert m.oracle.scalar_curvature == 0.5
    assert m.scalar_curvature_error() < 1e-4


def test_sphere_error_decreases_with_resolution():
    e32 = round_sphere_chart(2, 1.0, 32).scalar_curvature_error()
    e64 = round_sphere_chart(2, 1.0, 64).scalar_curvature_error()
    assert e64 < e32 / 8


def test_product_flags():
    a = product_spheres(2, 1.0, 2, 1.0, 16)
    assert a.oracle.einstein and a.oracle.scalar_curvature == 4
    b = product_spheres(2, 1.0, 3, 1.0, 16)
    assert not b.oracle.einstein and b.oracle.scalar_curvature == 8
    with pytest.raises(PreconditionError):
        product_spheres(3, 1.0, 3, 1.0, 16)


def test_scalar_flat_product_oracle():
    # hyperbolic surface of curvature -1 times a unit sphere: bookkeeping only
    orc = product_oracle(-2.0, 2, 2.0, 2)
    assert orc["scalar_flat"] and not orc["einstein"]
    assert orc["scalar_curvature"] == 0.0


def test_conformal_deform():
    g0 = flat_torus(2, None, 32, "spectral").metric
    zero = ScalarField(g0.chart, np.zeros((1, 1)))
    assert np.all(conformal_deform(g0, zero).tensor.values == g0.tensor.values)
    k = ScalarField(g0.chart, np.full((1, 1), 0.2))
    assert conformal_deform(g0, k).volume == pytest.approx(np.exp(2 * 0.2))
    f = random_function(g0.chart, 0.3, 2, 5)
    g = conformal_deform(g0, f)
    s = scalar_curvature(g).values
    ref = 2 * np.exp(-2 * f.values) * laplacian(f, g0).values
    assert np.max(np.abs(s - ref)) < 1e-9
    back = conformal_deform(g, -1.0 * f)
    assert np.max(np.abs(back.tensor.values - g0.tensor.values)) < 1e-14


def test_random_perturbation():
    g0 = flat_torus(3, None, 16, "spectral").metric
    assert random_perturbation(g0, 0.0, 2, 1) is g0
    a = random_perturbation(g0, 0.05, 3, 1)
    b = random_perturbation(g0, 0.05, 3, 1)
    assert np.array_equal(a.tensor.values, b.tensor.values)
    assert critical_residual(a) > 0
    with pytest.raises(MetricError, match="smaller"):
        random_perturbation(g0, 5.0, 2, 1)


def test_band_limit():
    ch = flat_torus(2, None, 16, "spectral").chart
    f = random_function(ch, 1.0, 2, 3).values
    spec = np.abs(np.fft.fftn(f))
    k = np.fft.fftfreq(16, 1 / 16)
    kk = k[:, None] ** 2 + k[None, :] ** 2
    assert np.max(spec[kk > 4]) < 1e-12 * np.max(spec)
    assert np.max(np.abs(f)) == pytest.approx(1.0)


def test_descriptor_errors():
    with pytest.raises(ConfigError):
        from_descriptor({"family": "klein_bottle"})
    with pytest.raises(ConfigError):
        from_descriptor({"family": "flat_torus"})
    with pytest.raises(ConfigError):
        from_descriptor([1, 2])


def test_descriptor_unit_volume():
    m = from_descriptor({"family": "round_sphere", "n": 2, "resolution": 32,
                         "order": "spectral", "unit_volume": True})
    assert m.metric.volume == pytest.approx(1.0, abs=1e-12)
    assert m.oracle.scalar_curvature == pytest.approx(8 * np.pi)
    assert m.scalar_curvature_error() < 1e-8
