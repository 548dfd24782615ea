"""The total scalar curvature H, the energy S = int s^2 and their variations."""

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .curvature import (
    _div_tensor_array, _hess_array, _lap_array, conformal_residual, laplacian, ricci,
    scalar_curvature)
from .errors import ConformalityWarning
from .fields import (
    MetricField, ScalarField, SymTensorField, _inner_full, field_norm, integrate, pack,
    project_constants, trace, trace_free_part)


def _s(g):
    return scalar_curvature(g).values


def hilbert_H(g):
    """H(g) = int s dmu."""
    return integrate(scalar_curvature(g), g)


def energy_S(g):
    """S(g) = int s^2 dmu."""
    return integrate(scalar_curvature(g) ** 2, g)


def lambda_multiplier(g):
    """lambda_g = (n - 4)/(2n) * pi_g(s^2), the multiplier of the critical equation."""
    n = g.n
    if n == 4:
        return 0.0
    return (n - 4) / (2.0 * n) * energy_S(g) / g.volume


def _grad_parts(g):
    s = _s(g)
    lap = _lap_array(s, g)
    hess = _hess_array(s, g)
    R = ricci(g).full()
    return s, lap, hess, R


def grad_S_array(g, form="cm"):
    """Full component array of the L2 gradient of S."""
    n = g.n
    s, lap, hess, R = _grad_parts(g)
    G = g.g
    if form == "cm":
        out = (2.0 * lap + 0.5 * s**2) * G + 2.0 * hess - 2.0 * s * R
    elif form == "map":
        out = (((2 * n - 2) / n) * lap + ((n - 4) / (2.0 * n)) * s**2) * G \
            + 2.0 * (hess + (lap / n) * G - s * (R - (s / n) * G))
    else:
        raise ValueError(f"unknown form {form!r}")
    return np.broadcast_to(out, (n, n) + np.broadcast_shapes(out.shape[2:], g.chart.shape))


def grad_S(g, form="cm"):
    """Gradient of S as a symmetric tensor, assembled as ``"cm"`` or ``"map"``.

    The ``cm`` form is (2 Delta s + s^2/2) g + 2 nabla ds - 2 s r; the
    ``map`` form splits it into its trace and trace-free parts.
    """
    return SymTensorField(g.chart, pack(grad_S_array(g, form)))


def gradient_pairing(g, h):
    """<grad S, h>_{L2} = int (grad S, h)_g dmu."""
    return integrate(ScalarField(g.chart, _inner_full(grad_S_array(g), h.full(), g.ginv)), g)


def critical_residual(g, norm="L2"):
    """||grad S - lambda_g g||."""
    res = grad_S(g) - lambda_multiplier(g) * g.tensor
    return field_norm(res, g, norm)


def trace_residual(g):
    """Residual of the trace equation (2n-2) Delta s + (n-4)/2 (s^2 - pi(s^2))."""
    n = g.n
    s = scalar_curvature(g)
    lap = laplacian(s, g).values
    pi_s2 = energy_S(g) / g.volume
    return ScalarField(g.chart, (2 * n - 2) * lap + 0.5 * (n - 4) * (s.values**2 - pi_s2))


def einstein_te_residuals(g, norm="L2"):
    """Norms of r - (s/n) g and 2 s ((s/n) g - r)."""
    n = g.n
    s = _s(g)
    R = ricci(g).full()
    E = R - (s / n) * g.g
    ein = SymTensorField(g.chart, pack(E))
    te = SymTensorField(g.chart, pack(-2.0 * s * E))
    return field_norm(ein, g, norm), field_norm(te, g, norm)


def pairing_fact(g, phi, c):
    """int ((2n-2)/n Delta s + (n-4)/(2n)(s^2 - c^2)) (g, phi g)_g dmu."""
    n = g.n
    s = _s(g)
    lap = _lap_array(s, g)
    integrand = (((2 * n - 2) / n) * lap + ((n - 4) / (2.0 * n)) * (s**2 - c**2)) * n * phi.values
    return integrate(ScalarField(g.chart, integrand), g)


def second_variation_form(g, h):
    """(n-4)/(2n) pi(s^2) (-int (z, z) + (n-2)/(2n) int (g, h)^2) with z = z_g(h)."""
    n = g.n
    if n == 4:
        return 0.0
    z = trace_free_part(h, g)
    zz = integrate(ScalarField(g.chart, _inner_full(z.full(), z.full(), g.ginv)), g)
    tr = trace(h, g)
    tt = integrate(tr**2, g)
    pi_s2 = energy_S(g) / g.volume
    return (n - 4) / (2.0 * n) * pi_s2 * (-zz + (n - 2) / (2.0 * n) * tt)


def scalar_curvature_variation(g, h):
    """s' = Delta(trace h) + delta(delta h) - (r, h)."""
    ch = g.chart
    H = h.full()
    tr = np.einsum("ij...,ij...->...", g.ginv, H)
    lap_tr = _lap_array(tr, g)
    dh = _div_tensor_array(H, g)                      # covariant (delta h)_j
    raised = np.einsum("ij...,j...->i...", g.ginv, dh)
    rho = g.signed_density
    ddh = 0.0
    for k in range(g.n):
        ddh = ddh + ch.d1(rho * raised[k], k)
    sign = 1.0 if ch.sign_convention == "geometer" else -1.0
    ddh = -sign * ddh / rho
    rh = _inner_full(ricci(g).full(), H, g.ginv)
    return ScalarField(ch, lap_tr + ddh - rh)


def kazdan_warner_integral(g, X, certify_tol=1e-6):
    """int X(s) dmu; warns if X is not certified conformal for g."""
    res = conformal_residual(X, g)
    if res > certify_tol:
        warnings.warn(f"vector field is not conformal (residual {res:.3e})", ConformalityWarning,
                      stacklevel=2)
    ch = g.chart
    s = _s(g)
    ds = [ch.d1(s, k) for k in range(g.n)]
    Xs = sum(X.values[k] * ds[k] for k in range(g.n))
    return integrate(ScalarField(ch, np.broadcast_to(Xs, np.broadcast_shapes(
        np.shape(Xs), g.density.shape))), g)


@dataclass(frozen=True)
class Lemma3Result:
    tag: str
    dimension: int
    min_s: float
    max_s: float
    pi_s2: float
    s2_at_extremum: float
    constant: bool


def lemma3_classify(g, tol=1e-8):
    """Report which sign hypothesis of the maximum-principle lemma holds.

    ``case-1-applicable``: n > 4 and max s >= |min s|.
    ``case-2-applicable``: n < 4 and min s <= -|max s|.
    The result is diagnostic; no constancy is asserted.
    """
    s = scalar_curvature(g)
    lo, hi = s.min(), s.max()
    n = g.n
    pi_s2 = energy_S(g) / g.volume
    scale = max(1.0, abs(lo), abs(hi))
    constant = (hi - lo) <= tol * scale
    if n > 4 and hi >= abs(lo) - tol * scale:
        tag, ext = "case-1-applicable", hi
    elif n < 4 and lo <= -abs(hi) + tol * scale:
        tag, ext = "case-2-applicable", lo
    else:
        tag, ext = "neither", hi if abs(hi) >= abs(lo) else lo
    return Lemma3Result(tag, n, lo, hi, pi_s2, ext**2, bool(constant))


@dataclass(frozen=True)
class FunctionalReport:
    """One-shot evaluation of the functionals at a metric."""

    S: float
    H: float
    volume: float
    lambda_g: float
    pi_s: float
    pi_s2: float
    min_s: float
    max_s: float
    critical_residual: float
    trace_residual: float
    einstein_residual: float
    te_residual: float
    lemma3: str
    norm: str = "L2"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def functional_report(g, norm="L2"):
    s = scalar_curvature(g)
    vol = g.volume
    S = energy_S(g)
    ein, te = einstein_te_residuals(g, norm)
    return FunctionalReport(
        S=S, H=hilbert_H(g), volume=vol, lambda_g=lambda_multiplier(g),
        pi_s=project_constants(s, g), pi_s2=S / vol, min_s=s.min(), max_s=s.max(),
        critical_residual=critical_residual(g, norm),
        trace_residual=field_norm(trace_residual(g), g, norm),
        einstein_residual=ein, te_residual=te, lemma3=lemma3_classify(g).tag, norm=norm)


@dataclass(frozen=True)
class FirstVariationReport:
    """Defects between finite differences in t and the variation formulas."""

    volume_defect: float
    scalar_defect: float
    energy_defect: float
    gradient_defect: float
    energy_derivative: float
    dt: float

    @property
    def combined(self):
        return float(np.sqrt(self.volume_defect**2 + self.scalar_defect**2
                             + self.energy_defect**2 + self.gradient_defect**2))


def _path(g, h, t):
    return MetricField(SymTensorField(g.chart, g.tensor.values + t * h.values), g.spd_floor)


def first_variation_checks(g, h, dt=1e-4):
    """Compare central differences along g + t h with the variation formulas.

    Central differences at dt and dt/2 are Richardson-combined.  Reported
    defects: volume form (ratio of densities, L2), scalar curvature (L2),
    d/dt int s^2 against int 2 s (s' + s trace(h)/4) and against <grad S, h>.
    """
    if not 1e-6 <= dt <= 1e-2:
        raise ValueError(f"dt must lie in [1e-6, 1e-2], got {dt}")

    def central(step):
        gp, gm = _path(g, h, step), _path(g, h, -step)
        dens = (gp.density - gm.density) / (2 * step) / g.density
        ds = (_s(gp) - _s(gm)) / (2 * step)
        dS = (energy_S(gp) - energy_S(gm)) / (2 * step)
        return dens, ds, dS

    a, b = central(dt), central(dt / 2)
    dens, ds, dS = [(4 * y - x) / 3 for x, y in zip(a, b)]

    tr = trace(h, g).values
    sprime = scalar_curvature_variation(g, h).values
    s = _s(g)
    first_line = integrate(ScalarField(g.chart, 2 * s * (sprime + 0.25 * s * tr)), g)
    pairing = gradient_pairing(g, h)
    ch = g.chart

    def l2(x):
        return float(np.sqrt(ch.quad(np.broadcast_to(x, ch.shape) ** 2 * g.density, masked=True)))

    return FirstVariationReport(
        volume_defect=l2(dens - 0.5 * tr),
        scalar_defect=l2(ds - sprime),
        energy_defect=abs(dS - first_line),
        gradient_defect=abs(dS - pairing),
        energy_derivative=float(dS),
        dt=dt)


def cauchy_schwarz_gap(g):
    """pi(s^2) - pi(s)^2, nonnegative with equality iff s is constant."""
    s = scalar_curvature(g)
    return energy_S(g) / g.volume - project_constants(s, g) ** 2


__all__ = [
    "hilbert_H", "energy_S", "lambda_multiplier", "grad_S", "grad_S_array", "gradient_pairing",
    "critical_residual", "trace_residual", "einstein_te_residuals", "pairing_fact",
    "second_variation_form", "scalar_curvature_variation", "kazdan_warner_integral",
    "lemma3_classify", "Lemma3Result", "FunctionalReport", "functional_report",
    "FirstVariationReport", "first_variation_checks", "cauchy_schwarz_gap",
]
