"""Identity suites: each check reports its measured defect and the tolerance it is judged by."""

from dataclasses import asdict, dataclass

import numpy as np

from .curvature import (bianchi_residual, conformal_residual, divergence, hessian, laplacian)
from .fields import (MetricField, ScalarField, SymTensorField, _inner_full, integrate, l2_norm,
                     pointwise_inner, project_constants, trace, trace_free_part)
from .functionals import (cauchy_schwarz_gap, energy_S, first_variation_checks, gradient_pairing,
                          kazdan_warner_integral, pairing_fact, second_variation_form)
from .grid import build_torus_grid
from .models import (conformal_deform, flat_torus, random_function, random_perturbation,
                     random_symmetric_tensor, translation_field)

SUITES = ("bianchi", "variational", "pairing", "decomposition", "kazdan-warner",
          "cauchy-schwarz")

DEFAULT_TOLERANCES = {
    "bianchi": 1e-6,
    "variational": 1e-5,
    "self_adjoint": 1e-8,
    "pairing": 1e-9,
    "decomposition": 1e-12,
    "kazdan-warner": 1e-6,
    "conformal": 1e-7,
    "cauchy-schwarz": 1e-12,
}


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    defect: float
    tolerance: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def _check(suite, name, defect, tol, ok=None):
    defect = float(defect)
    passed = bool(defect <= tol) if ok is None else bool(ok)
    return Check(suite, name, defect, float(tol), passed)


@dataclass
class VerifySetup:
    n: int = 3
    resolution: int = 24
    order: object = "spectral"
    amplitude: float = 0.05
    max_frequency: int = 2
    seed: int = 42
    sign_convention: str = "geometer"

    def base(self, n=None):
        ch = build_torus_grid(n or self.n, self.resolution, order=self.order)
        ch = ch.with_sign_convention(self.sign_convention)
        full = np.zeros((ch.n, ch.n) + (1,) * ch.n)
        for i in range(ch.n):
            full[i, i] = 1.0
        return MetricField.from_full(ch, full)

    def metric(self):
        return random_perturbation(self.base(), self.amplitude, self.max_frequency, self.seed)


def suite_bianchi(st, tol):
    g = st.metric()
    out = [_check("bianchi", "contracted Bianchi ||delta r + ds/2||",
                  l2_norm(bianchi_residual(g), g), tol["bianchi"])]
    out.append(_check("bianchi", "parallel metric ||delta g||",
                      l2_norm(divergence(g.tensor, g), g), tol["bianchi"]))
    return out


def suite_variational(st, tol):
    out = []
    g = st.metric()
    h = random_symmetric_tensor(g.chart, 2 * st.amplitude, st.max_frequency, st.seed + 1)
    rep = first_variation_checks(g, h, 1e-4)
    out.append(_check("variational", "volume form d(dmu)/dt = tr(h)/2 dmu",
                      rep.volume_defect, tol["variational"]))
    out.append(_check("variational", "scalar curvature s' = Delta tr h + delta delta h - (r,h)",
                      rep.scalar_defect, tol["variational"]))
    out.append(_check("variational", "energy d/dt int s^2 = int 2s(s' + s tr(h)/4)",
                      rep.energy_defect, tol["variational"]))
    out.append(_check("variational", "energy d/dt int s^2 = <grad S, h>",
                      rep.gradient_defect, tol["variational"]))
    f = random_function(g.chart, 1.0, st.max_frequency, st.seed + 2)
    k = random_function(g.chart, 1.0, st.max_frequency, st.seed + 3)
    sa = abs(integrate(laplacian(f, g) * k, g) - integrate(f * laplacian(k, g), g))
    out.append(_check("variational", "Laplacian self-adjointness", sa, tol["self_adjoint"]))
    rq = integrate(f * laplacian(f, g), g)
    out.append(_check("variational", "Laplacian Rayleigh quotient >= 0", -rq,
                      tol["self_adjoint"]))
    th = l2_norm(trace(hessian(f, g), g) + laplacian(f, g), g)
    out.append(_check("variational", "trace of Hessian = -Laplacian", th, tol["self_adjoint"]))
    return out


def suite_pairing(st, tol):
    g = st.metric()
    phi = random_function(g.chart, 1.0, st.max_frequency, st.seed + 4)
    phi = phi - project_constants(phi, g)
    h = SymTensorField(g.chart, phi.values * g.tensor.values)
    direct = gradient_pairing(g, h)
    p0, p1 = pairing_fact(g, phi, 0.0), pairing_fact(g, phi, 1.0)
    scale = max(1.0, abs(direct))
    return [
        _check("pairing", "pairing identity vs direct <grad S, phi g> (relative)",
               abs(p0 - direct) / scale, tol["pairing"]),
        _check("pairing", "c-independence for mean-zero phi", abs(p1 - p0) / scale,
               tol["pairing"]),
    ]


def suite_decomposition(st, tol):
    g = st.metric()
    n = g.n
    h = random_symmetric_tensor(g.chart, 1.0, st.max_frequency, st.seed + 5)
    k = random_symmetric_tensor(g.chart, 1.0, st.max_frequency, st.seed + 6)
    zh, zk = trace_free_part(h, g), trace_free_part(k, g)
    trh, trk = trace(h, g).values, trace(k, g).values
    lhs = pointwise_inner(h, k, g).values
    rhs = trh * trk / n + pointwise_inner(zh, zk, g).values
    out = [
        _check("decomposition", "(h,k) = (h,g)(k,g)/n + (z(h),z(k))",
               np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs))), tol["decomposition"]),
        _check("decomposition", "z(h) is trace free",
               np.max(np.abs(trace(zh, g).values)), tol["decomposition"]),
        _check("decomposition", "h = (tr h / n) g + z(h)",
               np.max(np.abs(zh.values + (trh / n) * g.tensor.values - h.values)),
               tol["decomposition"]),
    ]
    # the quadratic form on its pure-trace and trace-free parts
    q = second_variation_form(g, h)
    pi_s2 = energy_S(g) / g.volume
    zz = integrate(ScalarField(g.chart, _inner_full(zh.full(), zh.full(), g.ginv)), g)
    tt = integrate(ScalarField(g.chart, trh**2), g)
    ref = (n - 4) / (2 * n) * pi_s2 * (-zz + (n - 2) / (2 * n) * tt)
    scale = max(1.0, abs(ref))
    out.append(_check("decomposition", "second variation closed form", abs(q - ref) / scale,
                      tol["decomposition"]))
    q2 = second_variation_form(g, 2.5 * h)
    out.append(_check("decomposition", "second variation is quadratic",
                      abs(q2 - 6.25 * q) / max(1.0, abs(q2)), tol["decomposition"]))
    return out


def suite_kazdan_warner(st, tol):
    out = []
    base = st.base()
    for i in range(3):
        f = random_function(base.chart, 2 * st.amplitude, st.max_frequency, st.seed + 10 + i)
        g = conformal_deform(base, f)
        direction = np.zeros(g.n)
        direction[i % g.n] = 1.0
        X = translation_field(g.chart, direction)
        cr = conformal_residual(X, g)
        out.append(_check("kazdan-warner", f"translation {i} is conformal", cr, tol["conformal"]))
        kw = kazdan_warner_integral(g, X, certify_tol=tol["conformal"])
        out.append(_check("kazdan-warner", f"int X(s) dmu = 0, metric {i}", abs(kw),
                          tol["kazdan-warner"]))
    return out


def suite_cauchy_schwarz(st, tol):
    out = []
    g = st.metric()
    gap = cauchy_schwarz_gap(g)
    out.append(_check("cauchy-schwarz", "pi(s^2) - pi(s)^2 >= 0 (perturbed metric)", -gap,
                      tol["cauchy-schwarz"]))
    flat = flat_torus(st.n, None, st.resolution, st.order).metric
    gap0 = cauchy_schwarz_gap(flat)
    out.append(_check("cauchy-schwarz", "equality for constant s (flat)", abs(gap0), 1e-12))
    return out


_RUNNERS = {
    "bianchi": suite_bianchi,
    "variational": suite_variational,
    "pairing": suite_pairing,
    "decomposition": suite_decomposition,
    "kazdan-warner": suite_kazdan_warner,
    "cauchy-schwarz": suite_cauchy_schwarz,
}


def run_suites(suites=SUITES, setup=None, tolerances=None):
    """Run the named suites and return the list of :class:`Check` results."""
    setup = setup or VerifySetup()
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    out = []
    for name in suites:
        out.extend(_RUNNERS[name](setup, tol))
    return out
