"""Volume-normalized flows of metrics on torus grids.

Three flows are provided:

* the gradient flow of S with the volume constraint,
  ``dg/dt = -(grad S - mu g)``;
* the Yamabe flow ``dg/dt = (pi(s) - s) g``;
* the perturbed Yamabe flow ``dg/dt = (pi(s) - s - v) g`` whose correction
  ``v`` keeps S constant along the flow.

The two conformal flows evolve the logarithmic conformal factor ``f`` of
``g = exp(2f) g0``, which keeps them exactly conformal.  Their leading term is
a heat equation for ``f``; it is integrated with the fourth-order exponential
Runge-Kutta scheme ETDRK4 (Cox and Matthews), treating a constant-coefficient
Laplacian exactly and everything else explicitly, so time steps far beyond
the explicit stability limit are stable.  The gradient flow is fourth order
in space and uses a linearly implicit, preconditioned descent step with step
rejection whenever S would increase.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .curvature import _lap_array, scalar_curvature
from .errors import MetricError, PreconditionError, SolverError
from .fields import (MetricField, ScalarField, SymTensorField, l2_norm, normalize_volume, pack,
                     project_constants)
from .functionals import (critical_residual, energy_S, grad_S_array, hilbert_H,
                          second_variation_form, trace_residual)
from .krylov import flat_inverse, weighted_pcg

COLUMNS = ("step", "t", "S", "H", "Vol", "min_s", "max_s", "Lambda", "v_norm",
           "critical_residual", "trace_residual", "dt")


def a_n(n):
    return 2.0 * n - 2.0


def b_n(n):
    return (n - 4) / 2.0


@dataclass
class DtPolicy:
    """Time-step policy: initial step, halving floor, growth after acceptance."""

    dt: float = 1e-3
    min_dt: float = 1e-9
    grow: float = 1.0
    max_dt: float = None

    @classmethod
    def coerce(cls, policy):
        if isinstance(policy, DtPolicy):
            return policy
        if isinstance(policy, dict):
            return cls(**policy)
        return cls(dt=float(policy))

    def as_dict(self):
        return {"dt": self.dt, "min_dt": self.min_dt, "grow": self.grow, "max_dt": self.max_dt}


@dataclass
class FlowState:
    t: float
    metric: MetricField
    s: ScalarField
    diagnostics: dict = field(default_factory=dict)


class FlowTrace:
    """Per-step diagnostics of a flow run with a fixed CSV schema."""

    def __init__(self, kind, meta=None):
        self.kind = kind
        self.meta = {"kind": kind, **(meta or {})}
        self.rows = []
        self.extras = []
        self.final_state = None

    def append(self, row, extra=None):
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("flow trace times must increase strictly")
        self.rows.append({c: row[c] for c in COLUMNS})
        self.extras.append(dict(extra or {}))

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([repr(int(r[c])) if c == "step" else repr(float(r[c])) for c in COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _quad_weights(g):
    return np.broadcast_to(g.chart.weights * g.density, g.chart.shape)


def _require_torus(g):
    if not g.chart.is_torus:
        raise PreconditionError("flows run on periodic torus grids")


# ----------------------------------------------------------------------
# the constant Lambda and the elliptic correction v


def compute_Lambda(g, floor=1e-14):
    """Lambda = <s + pi(s), a_n Delta u + b_n (s - pi(s)) u> / ||s + pi(s)||^2, u = pi(s) - s."""
    n = g.n
    s = np.broadcast_to(scalar_curvature(g).values, g.chart.shape)
    w = _quad_weights(g)
    pi_s = float(np.sum(w * s) / np.sum(w))
    u = pi_s - s
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.max(np.abs(u)) <= 1e-13 * scale:
        return 0.0
    ws = s + pi_s
    den = float(np.sum(w * ws * ws))
    if den <= floor * scale**2 * g.volume:
        raise PreconditionError(
            f"||s + pi(s)||^2 = {den:.3e} is below the floor; Lambda is undefined")
    Lu = a_n(n) * _lap_array(u, g) + b_n(n) * (s - pi_s) * u
    return float(np.sum(w * ws * Lu)) / den


@dataclass
class PerturbationSolve:
    """Result of the elliptic solve for v."""

    v: ScalarField
    Lambda: float
    Lambda_quotient: float
    orthogonality: float
    residual: float
    iterations: int
    method: str


def perturbation_solve(g, tol=1e-10, maxiter=None):
    """Solve (a_n Delta + b_n (s - pi(s))) v = Lambda (s + pi(s)) on mean-zero functions.

    The operator is restricted to dmu-mean-zero functions and the right-hand
    side is projected accordingly.  The multiplier actually used, ``Lambda``,
    makes ``h = u - v`` satisfy the orthogonality
    ``<s + pi(s), a_n Delta h + b_n (s - pi(s)) h> = 0`` exactly; it reduces to
    the quotient returned by :func:`compute_Lambda` when pi(s) = 0.
    """
    n = g.n
    if n == 4:
        raise PreconditionError(
            "n = 4: b_n = (n - 4)/2 = 0, so the perturbed Yamabe flow is not defined")
    _require_torus(g)
    ch = g.chart
    s = np.broadcast_to(scalar_curvature(g).values, ch.shape)
    w = _quad_weights(g)
    pi_s = float(np.sum(w * s) / np.sum(w))
    u = pi_s - s
    ws = s + pi_s
    q = s - pi_s
    an, bn = a_n(n), b_n(n)

    def L(x):
        return an * _lap_array(x, g) + bn * q * x

    quotient = compute_Lambda(g)
    if np.max(np.abs(u)) <= 1e-13 * max(1.0, float(np.max(np.abs(s)))):
        return PerturbationSolve(ScalarField(ch, np.zeros(ch.shape)), 0.0, quotient, 0.0,
                                 0.0, 0, "none")
    if maxiter is None:
        maxiter = int(10 * np.sqrt(ch.node_count))
    K = flat_inverse(ch)
    try:
        v1, info = weighted_pcg(L, ws, w, precond=K, tol=tol, maxiter=maxiter, project=True)
    except SolverError as exc:
        raise SolverError(f"elliptic solve for v failed: {exc}", exc.residual,
                          exc.iterations) from None
    Lv1 = L(v1)
    den = float(np.sum(w * ws * Lv1))
    num = float(np.sum(w * ws * L(u)))
    if abs(den) <= 1e-14 * float(np.sum(w * ws * ws)):
        raise SolverError("operator is singular on the mean-zero subspace")
    lam = num / den
    v = lam * v1
    ortho = float(np.sum(w * ws * L(u - v)))
    return PerturbationSolve(ScalarField(ch, v), lam, quotient, abs(ortho), info.residual,
                             info.iterations, info.method)


def solve_perturbation_v(g, tol=1e-10):
    """The correction v of the perturbed Yamabe flow (mean zero)."""
    return perturbation_solve(g, tol).v


# ----------------------------------------------------------------------
# conformal flows


def _etd_coefficients(Lh, contour_points=32):
    """ETDRK4 scalar coefficients by contour averaging (Kassam and Trefethen)."""
    vals, inv = np.unique(Lh, return_inverse=True)
    r = np.exp(1j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
    z = vals[:, None] + r[None, :]
    ez = np.exp(z)
    Q = np.real(np.mean((np.exp(z / 2) - 1) / z, axis=1))
    f1 = np.real(np.mean((-4 - z + ez * (4 - 3 * z + z**2)) / z**3, axis=1))
    f2 = np.real(np.mean((2 + z + ez * (z - 2)) / z**3, axis=1))
    f3 = np.real(np.mean((-4 - 3 * z - z**2 + ez * (4 - z)) / z**3, axis=1))
    shape = Lh.shape
    out = [np.exp(vals)[inv].reshape(shape), np.exp(vals / 2)[inv].reshape(shape)]
    out += [c[inv].reshape(shape) for c in (Q, f1, f2, f3)]
    return out


class _ConformalFlow:
    def __init__(self, g0, perturbed, tol):
        _require_torus(g0)
        self.base = normalize_volume(g0)
        self.chart = g0.chart
        self.n = g0.n
        self.perturbed = perturbed
        self.tol = tol
        self.sym = self.chart.flat_laplacian_symbol

    def metric(self, f):
        vals = np.exp(2.0 * f) * self.base.tensor.values
        return MetricField(SymTensorField(self.chart, vals), self.base.spd_floor)

    def evaluate(self, f):
        g = self.metric(f)
        s = np.broadcast_to(scalar_curvature(g).values, self.chart.shape)
        pi_s = project_constants(ScalarField(self.chart, s), g)
        if self.perturbed:
            sol = perturbation_solve(g, self.tol)
            v, lam, ortho = sol.v.values, sol.Lambda, sol.orthogonality
        else:
            v, lam, ortho = np.zeros(self.chart.shape), 0.0, 0.0
        return {"g": g, "s": s, "v": v, "Lambda": lam, "orthogonality": ortho,
                "rate": 0.5 * (pi_s - s - v)}

    def _fourier(self, x, mult):
        return np.real(np.fft.ifftn(np.fft.fftn(x) * mult))

    def step(self, f, ev, dt):
        """One ETDRK4 step from state f whose evaluation ``ev`` is given."""
        kappa = 1.0 / ev["g"].eigenvalue_range[0]
        Lsym = -(self.n - 1) * kappa * self.sym
        E, E2, Q, f1, f2, f3 = _etd_coefficients(Lsym * dt)

        def N(x, e=None):
            e = e if e is not None else self.evaluate(x)
            return e["rate"] - self._fourier(x, Lsym)

        fh = np.fft.fftn(f)
        Nu = np.fft.fftn(N(f, ev))
        a = np.real(np.fft.ifftn(E2 * fh + dt * Q * Nu))
        Na = np.fft.fftn(N(a))
        b = np.real(np.fft.ifftn(E2 * fh + dt * Q * Na))
        Nb = np.fft.fftn(N(b))
        c = np.real(np.fft.ifftn(E2 * np.fft.fftn(a) + dt * Q * (2 * Nb - Nu)))
        Nc = np.fft.fftn(N(c))
        new = E * fh + dt * (Nu * f1 + 2 * (Na + Nb) * f2 + Nc * f3)
        return np.real(np.fft.ifftn(new))


def _row(step, t, g, s, dt, Lambda=0.0, v=None):
    ch = g.chart
    sf = ScalarField(ch, s)
    return {
        "step": step, "t": t, "S": energy_S(g), "H": hilbert_H(g), "Vol": g.volume,
        "min_s": sf.min(), "max_s": sf.max(), "Lambda": Lambda,
        "v_norm": 0.0 if v is None else l2_norm(ScalarField(ch, v), g),
        "critical_residual": critical_residual(g),
        "trace_residual": l2_norm(trace_residual(g), g), "dt": dt,
    }


def _conformal_run(kind, g0, steps, dt, tol, seed):
    policy = DtPolicy.coerce(dt)
    if kind == "perturbed-yamabe" and g0.n == 4:
        raise PreconditionError(
            "n = 4: b_n = (n - 4)/2 = 0, so the perturbed Yamabe flow is not defined")
    flow = _ConformalFlow(g0, kind == "perturbed-yamabe", tol)
    trace = FlowTrace(kind, {"policy": policy.as_dict(), "grid": g0.chart.describe(),
                             "seed": seed, "integrator": "ETDRK4"})
    f = np.zeros(flow.chart.shape)
    t, h = 0.0, policy.dt
    ev = flow.evaluate(f)
    trace.append(_row(0, t, ev["g"], ev["s"], h, ev["Lambda"], ev["v"]),
                 {"orthogonality": ev["orthogonality"], "renormalization": 0.0})
    status, message = "completed", ""
    max_ortho, renorm_total = ev["orthogonality"], 0.0
    for k in range(1, steps + 1):
        while True:
            try:
                f_new = flow.step(f, ev, h)
                if not np.all(np.isfinite(f_new)):
                    raise MetricError("non-finite conformal factor")
                g_new = flow.metric(f_new)
                break
            except (MetricError, SolverError) as exc:
                h *= 0.5
                if h < policy.min_dt:
                    status, message = "breakdown", str(exc)
                    break
        if status != "completed":
            break
        renorm = g_new.volume - 1.0
        f = f_new - np.log(g_new.volume) / flow.n
        t += h
        try:
            ev = flow.evaluate(f)
        except (MetricError, SolverError, PreconditionError) as exc:
            status, message = "breakdown", str(exc)
            break
        max_ortho = max(max_ortho, ev["orthogonality"])
        renorm_total += abs(renorm)
        trace.append(_row(k, t, ev["g"], ev["s"], h, ev["Lambda"], ev["v"]),
                     {"orthogonality": ev["orthogonality"], "renormalization": renorm})
        if policy.grow != 1.0:
            h = min(h * policy.grow, policy.max_dt or np.inf)
    trace.meta.update(status=status, message=message, max_orthogonality_defect=max_ortho,
                      volume_renormalization_total=renorm_total)
    g = ev["g"] if status == "completed" else flow.metric(f)
    trace.final_state = FlowState(t, g, scalar_curvature(g), dict(trace.rows[-1]))
    trace.final_log_factor = f
    return trace


def yamabe_flow_run(g0, steps, dt=1e-3, tol=1e-10, seed=None):
    """Yamabe flow dg/dt = (pi(s) - s) g from the unit-volume rescaling of g0."""
    return _conformal_run("yamabe", g0, steps, dt, tol, seed)


def perturbed_yamabe_run(g0, steps, dt=1e-3, tol=1e-10, seed=None):
    """Perturbed Yamabe flow dg/dt = (pi(s) - s - v) g keeping S constant.

    Lambda and v are recomputed at every stage of the integrator.  An elliptic
    solve that fails even after halving the step ends the run with status
    ``"breakdown"``; the trace then holds the last valid state.
    """
    return _conformal_run("perturbed-yamabe", g0, steps, dt, tol, seed)


def level_set_hessian_check(g, trace=None, tol=1e-10):
    """Second-variation form at h = (pi(s) - s - v(0)) g of a perturbed-flow start."""
    if trace is not None and trace.kind != "perturbed-yamabe":
        raise PreconditionError("trace must come from perturbed_yamabe_run")
    if g.n == 4:
        return 0.0
    gn = normalize_volume(g)
    sol = perturbation_solve(gn, tol)
    s = np.broadcast_to(scalar_curvature(gn).values, gn.chart.shape)
    pi_s = project_constants(ScalarField(gn.chart, s), gn)
    phi = pi_s - s - sol.v.values
    h = SymTensorField(gn.chart, phi * gn.tensor.values)
    return second_variation_form(gn, h)


# ----------------------------------------------------------------------
# gradient flow


def gradient_flow_run(g0, steps, dt=1e-3, stop_tol=None, seed=None):
    """Volume-constrained gradient descent of S.

    Each step is ``g <- g - dt P (grad S - mu g)`` followed by rescaling to unit
    volume, with ``mu = int (g, grad S) dmu / (n Vol)`` and
    ``P = (1 + dt C Delta_0^2)^(-1)`` a constant-coefficient smoother bounding
    the stiff part of the gradient, so the step is stable for every dt.  A step
    that would increase S is rejected and retried with half the step.  With
    ``stop_tol`` the run ends once the trace residual falls below it.
    """
    _require_torus(g0)
    policy = DtPolicy.coerce(dt)
    g = normalize_volume(g0)
    ch, n = g.chart, g.n
    sym2 = ch.flat_laplacian_symbol**2
    trace = FlowTrace("gradient", {"policy": policy.as_dict(), "grid": ch.describe(),
                                   "seed": seed, "integrator": "preconditioned-descent"})
    t, h = 0.0, policy.dt
    S = energy_S(g)
    trace.append(_row(0, t, g, np.broadcast_to(scalar_curvature(g).values, ch.shape), h),
                 {"renormalization": 0.0, "rejections": 0})
    status, message = "completed", ""
    for k in range(1, steps + 1):
        if stop_tol is not None and trace.rows[-1]["trace_residual"] < stop_tol:
            status = "converged"
            break
        G = grad_S_array(g)
        tr = np.einsum("ij...,ij...->...", g.ginv, G)
        mu = ch.quad(tr * g.density) / (n * g.volume)
        D = pack(G - mu * g.g)
        D = np.broadcast_to(D, D.shape[:1] + ch.shape)
        kappa = 1.0 / g.eigenvalue_range[0]
        C = 2.0 * (n - 1) * kappa**2
        Dh = np.fft.fftn(D, axes=tuple(range(1, n + 1)))
        rejections = 0
        while True:
            step_vals = np.real(np.fft.ifftn(Dh / (1.0 + h * C * sym2),
                                             axes=tuple(range(1, n + 1))))
            try:
                trial = MetricField(SymTensorField(ch, g.tensor.values - h * step_vals),
                                    g.spd_floor)
                vol = trial.volume
                trial = normalize_volume(trial)
                S_new = energy_S(trial)
                if S_new <= S:
                    break
            except MetricError:
                pass
            rejections += 1
            h *= 0.5
            if h < policy.min_dt:
                status, message = "stalled", "no decreasing step above min_dt"
                break
        if status != "completed":
            break
        g, S = trial, S_new
        t += h
        trace.append(_row(k, t, g, np.broadcast_to(scalar_curvature(g).values, ch.shape), h),
                     {"renormalization": vol - 1.0, "rejections": rejections})
        if policy.grow != 1.0:
            h = min(h * policy.grow, policy.max_dt or np.inf)
    trace.meta.update(status=status, message=message)
    trace.final_state = FlowState(t, g, scalar_curvature(g), dict(trace.rows[-1]))
    return trace
