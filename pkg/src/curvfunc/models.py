"""Metric families with closed-form curvature, and seeded random fields."""

from dataclasses import dataclass, field

import numpy as np

from .curvature import scalar_curvature
from .errors import ConfigError, MetricError, PreconditionError
from .fields import MetricField, ScalarField, SymTensorField, VectorField
from .grid import build_torus_grid, product_chart, sphere_chart_grid


@dataclass(frozen=True)
class Oracle:
    """Exact data of a model metric."""

    scalar_curvature: object = None
    ricci: str = ""
    volume: object = None
    einstein: object = None
    scalar_flat: object = None


@dataclass(frozen=True)
class ModelMetric:
    family: str
    params: dict
    metric: MetricField
    oracle: Oracle = field(default_factory=Oracle)

    @property
    def chart(self):
        return self.metric.chart

    def scalar_curvature_error(self, pole_angle=None):
        """Largest relative deviation of computed s from the oracle on kept nodes.

        By default the chart's excision mask decides which nodes count.  With
        ``pole_angle`` only nodes farther than that angle from every pole are
        used, which fixes the region independently of the resolution.
        """
        s0 = self.oracle.scalar_curvature
        ch = self.chart
        s = np.broadcast_to(scalar_curvature(self.metric).values, ch.shape)
        keep = ch.mask
        if pole_angle is not None:
            keep = np.ones(ch.shape, dtype=bool)
            for a, kind in enumerate(ch.kinds):
                if kind.startswith("polar"):
                    th = ch.axis_coordinates(a) % np.pi
                    shp = [1] * ch.n
                    shp[a] = -1
                    keep = keep & (np.minimum(th, np.pi - th) > pole_angle).reshape(shp)
        err = np.abs(s - s0)[keep]
        return float(err.max() / (abs(s0) if s0 else 1.0))


def _diag_metric(chart, diag):
    n = chart.n
    shape = np.broadcast_shapes(*[np.shape(d) for d in diag])
    full = np.zeros((n, n) + shape)
    for i, d in enumerate(diag):
        full[i, i] = d
    return MetricField.from_full(chart, full)


def flat_torus(n, periods=None, resolution=32, order=4):
    """Flat torus R^n / (periods Z^n) with the Euclidean metric."""
    chart = build_torus_grid(n, resolution, periods, order)
    g = _diag_metric(chart, [np.ones((1,) * n)] * n)
    oracle = Oracle(0.0, "r = 0", float(np.prod(chart.extents)), True, True)
    return ModelMetric("flat_torus", {"n": n, "periods": list(chart.extents),
                                      "resolution": resolution}, g, oracle)


def _sphere_diag(n, radius, coords):
    """Diagonal metric entries of S^n(radius) in angular coordinates."""
    r2 = radius**2
    if n == 2:
        th = coords[0]
        return [r2 * np.ones_like(th), r2 * np.sin(th) ** 2]
    chi, th = coords[0], coords[1]
    return [r2 * np.ones_like(chi), r2 * np.sin(chi) ** 2,
            r2 * np.sin(chi) ** 2 * np.sin(th) ** 2]


def _sphere_volume(n, radius):
    return 4 * np.pi * radius**2 if n == 2 else 2 * np.pi**2 * radius**3


def round_sphere_chart(n, radius=1.0, resolution=64, order=6):
    """Round n-sphere of the given radius in angular coordinates (n in {2, 3})."""
    if radius <= 0:
        raise PreconditionError("radius must be positive")
    chart = sphere_chart_grid(n, resolution, order)
    g = _diag_metric(chart, _sphere_diag(n, radius, chart.coordinates()))
    s = n * (n - 1) / radius**2
    oracle = Oracle(s, f"r = {(n - 1) / radius**2!r} g", _sphere_volume(n, radius), True, False)
    return ModelMetric("round_sphere", {"n": n, "radius": radius, "resolution": resolution},
                       g, oracle)


def product_spheres(p, r1, q, r2, resolution=32, order=6):
    """Riemannian product S^p(r1) x S^q(r2), p, q in {2, 3}."""
    if p not in (2, 3) or q not in (2, 3) or p + q > 5:
        raise PreconditionError("product_spheres needs p, q in {2, 3} with p + q <= 5")
    a, b = sphere_chart_grid(p, resolution, order), sphere_chart_grid(q, resolution, order)
    chart = product_chart(a, b)
    x = chart.coordinates()
    diag = _sphere_diag(p, r1, x[:p]) + _sphere_diag(q, r2, x[p:])
    g = _diag_metric(chart, diag)
    k1, k2 = (p - 1) / r1**2, (q - 1) / r2**2
    orc = product_oracle(p * k1, p, q * k2, q)
    oracle = Oracle(orc["scalar_curvature"], f"blocks {k1!r} g1 and {k2!r} g2",
                    _sphere_volume(p, r1) * _sphere_volume(q, r2), orc["einstein"],
                    orc["scalar_flat"])
    return ModelMetric("product_spheres", {"p": p, "r1": r1, "q": q, "r2": r2,
                                           "resolution": resolution}, g, oracle)


def product_oracle(s1, p, s2, q, rtol=1e-12):
    """Curvature bookkeeping for a product of constant-curvature Einstein factors.

    The Ricci tensor is block diagonal with blocks (s1/p) g1 and (s2/q) g2, so
    the product is Einstein iff s1/p = s2/q and scalar flat iff s1 = -s2.
    """
    s = s1 + s2
    scale = max(abs(s1), abs(s2), 1.0)
    return {
        "scalar_curvature": s,
        "einstein": bool(abs(s1 / p - s2 / q) <= rtol * scale),
        "scalar_flat": bool(abs(s) <= rtol * scale),
    }


def conformal_deform(g, f):
    """e^{2f} g."""
    if f.chart != g.chart:
        raise PreconditionError("f and g must share a chart")
    return MetricField(SymTensorField(g.chart, np.exp(2.0 * f.values) * g.tensor.values),
                       g.spd_floor)


def _wave_vectors(n, max_frequency):
    rng = range(-max_frequency, max_frequency + 1)
    ks = np.array(np.meshgrid(*[rng] * n, indexing="ij")).reshape(n, -1).T
    keep = (np.sum(ks**2, axis=1) <= max_frequency**2) & np.any(ks != 0, axis=1)
    return ks[keep]


def _band_limited(chart, rng, count, max_frequency):
    """``count`` random real trigonometric polynomials with |k| <= max_frequency."""
    if not chart.is_torus:
        raise PreconditionError("random band-limited fields are defined on torus grids")
    x = chart.coordinates()
    ks = _wave_vectors(chart.n, max_frequency)
    out = np.zeros((count,) + chart.shape)
    for c in range(count):
        amp = rng.standard_normal(len(ks))
        phase = rng.uniform(0.0, 2 * np.pi, len(ks))
        for k, a, ph in zip(ks, amp, phase):
            arg = ph + sum(2 * np.pi * k[i] * x[i] / chart.extents[i] for i in range(chart.n))
            out[c] += a * np.cos(arg)
    return out


def _normalized(arr, amplitude):
    peak = np.max(np.abs(arr))
    return arr * (amplitude / peak) if peak > 0 else arr


def random_function(chart, amplitude, max_frequency, seed):
    """Mean-zero band-limited function with sup norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    vals = _band_limited(chart, rng, 1, max_frequency)[0]
    return ScalarField(chart, _normalized(vals, amplitude))


def random_symmetric_tensor(chart, amplitude, max_frequency, seed):
    """Band-limited symmetric tensor, each component with sup norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    m = chart.n * (chart.n + 1) // 2
    comps = _band_limited(chart, rng, m, max_frequency)
    return SymTensorField(chart, np.stack([_normalized(c, amplitude) for c in comps]))


def random_vector_field(chart, amplitude, max_frequency, seed):
    rng = np.random.default_rng(seed)
    comps = _band_limited(chart, rng, chart.n, max_frequency)
    return VectorField(chart, np.stack([_normalized(c, amplitude) for c in comps]))


def random_perturbation(g, amplitude, max_frequency, seed):
    """g + P with P a seeded band-limited symmetric tensor of sup norm ``amplitude``."""
    if amplitude == 0:
        return g
    P = random_symmetric_tensor(g.chart, amplitude, max_frequency, seed)
    try:
        return MetricField(SymTensorField(g.chart, g.tensor.values + P.values), g.spd_floor)
    except MetricError as exc:
        raise MetricError(f"{exc}; use a smaller perturbation amplitude") from None


def translation_field(chart, direction):
    """Constant vector field along a coordinate direction."""
    v = np.zeros((chart.n,) + (1,) * chart.n)
    v[:, ...] = np.asarray(direction, dtype=float).reshape((chart.n,) + (1,) * chart.n)
    return VectorField(chart, v)


def from_descriptor(desc, seed=0):
    """Build a model from a JSON-style descriptor ``{"family": ..., ...}``.

    Families: ``flat_torus``, ``round_sphere``, ``product_spheres``,
    ``conformal_torus`` (flat torus times a seeded conformal factor) and
    ``perturbed_torus`` (flat torus plus a seeded symmetric perturbation).
    ``"unit_volume": true`` rescales the result to volume one.
    """
    if not isinstance(desc, dict) or "family" not in desc:
        raise ConfigError("model descriptor must be an object with a 'family' key")
    d = dict(desc)
    fam = d.pop("family")
    unit = bool(d.pop("unit_volume", False))
    order = d.pop("order", None)
    try:
        if fam == "flat_torus":
            model = flat_torus(d["n"], d.get("periods"), d.get("resolution", 32), order or 4)
        elif fam == "round_sphere":
            model = round_sphere_chart(d["n"], d.get("radius", 1.0), d.get("resolution", 64),
                                       order or 6)
        elif fam == "product_spheres":
            model = product_spheres(d["p"], d.get("r1", 1.0), d["q"], d.get("r2", 1.0),
                                    d.get("resolution", 32), order or 6)
        elif fam in ("conformal_torus", "perturbed_torus"):
            base = flat_torus(d["n"], d.get("periods"), d.get("resolution", 24), order or "spectral")
            amp, kmax = float(d.get("amplitude", 0.05)), int(d.get("max_frequency", 2))
            s = int(d.get("seed", seed))
            if fam == "conformal_torus":
                f = random_function(base.chart, amp, kmax, s)
                g = conformal_deform(base.metric, f)
            else:
                g = random_perturbation(base.metric, amp, kmax, s)
            params = {"n": d["n"], "resolution": base.params["resolution"], "amplitude": amp,
                      "max_frequency": kmax, "seed": s}
            model = ModelMetric(fam, params, g, Oracle())
        else:
            raise ConfigError(f"unknown model family {fam!r}")
    except KeyError as exc:
        raise ConfigError(f"model descriptor for {fam!r} is missing {exc}") from None
    if unit:
        from .fields import normalize_volume
        model = ModelMetric(model.family, {**model.params, "unit_volume": True},
                            normalize_volume(model.metric), _scaled_oracle(model))
    return model


def _scaled_oracle(model):
    o = model.oracle
    if o.volume is None:
        return o
    c = o.volume ** (-2.0 / model.metric.n)   # g -> c g
    s = None if o.scalar_curvature is None else o.scalar_curvature / c
    return Oracle(s, o.ricci, 1.0, o.einstein, o.scalar_flat)
