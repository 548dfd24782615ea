"""The model trace equation: the ODE 2u'' = c^2 - u^2 and the PDE 2 Delta u = u^2 - c^2.

Multiplying the ODE by u' gives the first integral
``K = u'^2 - c^2 u + u^3/3``.  Bounded orbits circle the center u = |c| for
``-2|c|^3/3 <= K < 2|c|^3/3``; the saddle at u = -|c| bounds them.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import PreconditionError, SolverError
from .fields import MetricField, ScalarField, SymTensorField
from .curvature import _lap_array
from .krylov import flat_inverse, weighted_minres


def energy(c, u, v):
    return v * v - c * c * u + u**3 / 3.0


def _rhs(c2, u, v):
    return v, 0.5 * (c2 - u * u)


def _rk4(c2, u, v, dt):
    k1u, k1v = _rhs(c2, u, v)
    k2u, k2v = _rhs(c2, u + 0.5 * dt * k1u, v + 0.5 * dt * k1v)
    k3u, k3v = _rhs(c2, u + 0.5 * dt * k2u, v + 0.5 * dt * k2v)
    k4u, k4v = _rhs(c2, u + dt * k3u, v + dt * k3v)
    return (u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
            v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


@dataclass
class OdeOrbit:
    """Sampled trajectory of 2u'' = c^2 - u^2."""

    c: float
    u0: float
    v0: float
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    period: object
    energy: float
    energy_drift: float
    bounded: bool
    crossings: np.ndarray

    @property
    def constant(self):
        return bool(np.all(self.u == self.u0) and np.all(self.v == self.v0))

    def to_csv(self, path=None):
        lines = ["t,u,v"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(self.t.tolist(), self.u.tolist(),
                                                         self.v.tolist())]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _period_estimate(c, K):
    try:
        return ode_period_quadrature(c, K)
    except ValueError:
        return 2 * np.pi / math.sqrt(abs(c)) if c != 0 else 1.0


def ode_integrate(c, u0, v0, t_max, dt=None, escape=None):
    """RK4 trajectory of 2u'' = c^2 - u^2 with period detection.

    The default step is T/2000 for the orbit's period estimate T.  The period
    is read off the Poincare section u' = 0, u > |c| (crossings located by
    quadratic interpolation) and averaged over all detected returns.  The run
    stops early with a non-periodic verdict once |u| exceeds ``escape``.
    """
    c, u0, v0, t_max = float(c), float(u0), float(v0), float(t_max)
    if not all(map(math.isfinite, (c, u0, v0, t_max))) or t_max <= 0:
        raise PreconditionError("ode_integrate needs finite inputs and t_max > 0")
    K0 = energy(c, u0, v0)
    if dt is None:
        dt = _period_estimate(c, K0) / 2000.0
    steps = max(1, int(math.ceil(t_max / dt)))
    dt = t_max / steps
    if escape is None:
        escape = 10.0 * max(abs(c), abs(u0), 1.0)
    c2 = c * c
    us = np.empty(steps + 1)
    vs = np.empty(steps + 1)
    us[0], vs[0] = u0, v0
    u, v = u0, v0
    bounded = True
    last = steps
    for i in range(1, steps + 1):
        u, v = _rk4(c2, u, v, dt)
        us[i], vs[i] = u, v
        if not abs(u) <= escape:
            bounded, last = False, i
            break
    us, vs = us[: last + 1], vs[: last + 1]
    ts = np.arange(last + 1) * dt
    drift = float(np.max(np.abs(energy(c, us, vs) - K0)))
    crossings = _section_crossings(ts, us, vs, abs(c)) if bounded else np.array([])
    period = None
    if bounded and len(crossings) >= 2:
        period = float((crossings[-1] - crossings[0]) / (len(crossings) - 1))
    return OdeOrbit(c, u0, v0, ts, us, vs, period, K0, drift, bounded, crossings)


def _section_crossings(t, u, v, c):
    """Times where v goes from positive to nonpositive with u > c."""
    idx = np.nonzero((v[1:-1] > 0) & (v[2:] <= 0) & (u[1:-1] > c))[0] + 1
    out = []
    for i in idx:
        # parabola through (i-1, i, i+1); root between t_i and t_{i+1}
        x = t[i - 1:i + 2] - t[i]
        a, b, cc = np.polyfit(x, v[i - 1:i + 2], 2)
        roots = np.roots([a, b, cc]) if a != 0 else np.array([-cc / b])
        roots = roots[np.isreal(roots)].real
        h = t[i + 1] - t[i]
        ok = roots[(roots >= -1e-12 * h) & (roots <= h * (1 + 1e-12))]
        if len(ok):
            out.append(t[i] + ok[0])
    return np.array(out)


def ode_period_quadrature(c, K):
    """Period 2 int du / sqrt(K + c^2 u - u^3/3) between the turning points.

    With u = (u+ + u-)/2 - (u+ - u-)/2 cos(theta) both square-root endpoint
    singularities cancel and the integrand becomes sqrt(3 / (u - u3)), u3 the
    third root of the cubic.
    """
    c = abs(float(c))
    K = float(K)
    kmin, kmax = -2.0 * c**3 / 3.0, 2.0 * c**3 / 3.0
    if c == 0 or not kmin - 1e-14 * max(c**3, 1) <= K < kmax:
        raise ValueError(f"no bounded orbit at energy K = {K!r} for c = {c!r}")
    roots = np.sort(np.roots([-1.0 / 3.0, 0.0, c * c, K]).real)
    u3, um, up = roots
    um, up = min(um, c), max(up, c)
    mid, half = 0.5 * (up + um), 0.5 * (up - um)

    def integrand(th):
        return math.sqrt(3.0 / (mid - half * math.cos(th) - u3))

    val, _ = quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
    return 2.0 * val


# ----------------------------------------------------------------------
# PDE on flat tori


def _flat_metric(chart):
    n = chart.n
    full = np.zeros((n, n) + (1,) * n)
    for i in range(n):
        full[i, i] = 1.0
    return MetricField(SymTensorField.from_full(chart, full))


@dataclass
class PdeResult:
    u: ScalarField
    residual: float
    iterations: int
    history: list


def pde_newton(chart, c, u_init, tol=1e-8, max_newton=30, linear_tol=1e-11):
    """Damped Newton iteration for 2 Delta u - (u^2 - c^2) = 0 on a flat torus."""
    if not chart.is_torus:
        raise PreconditionError("the trace PDE is solved on flat torus grids")
    g = _flat_metric(chart)
    w = np.broadcast_to(chart.weights * g.density, chart.shape)
    c2 = float(c) ** 2
    u = np.array(np.broadcast_to(u_init.values, chart.shape), dtype=float)

    def F(x):
        return 2.0 * _lap_array(x, g) - (x * x - c2)

    def norm(r):
        return float(np.sqrt(np.sum(w * r * r)))

    r = F(u)
    hist = [norm(r)]
    K = flat_inverse(chart, shift=max(abs(float(c)), 1e-3))
    for it in range(1, max_newton + 1):
        if hist[-1] < tol:
            return PdeResult(ScalarField(chart, u), hist[-1], it - 1, hist)
        uu = u

        def J(x):
            return 2.0 * _lap_array(x, g) - 2.0 * uu * x

        du, _ = weighted_minres(J, -r, w, precond=K, tol=linear_tol,
                                maxiter=20 * int(np.sqrt(u.size)) + 200)
        lam = 1.0
        while True:
            trial = u + lam * du
            rt = F(trial)
            if norm(rt) < hist[-1] or lam < 1e-4:
                break
            lam *= 0.5
        u, r = trial, rt
        hist.append(norm(r))
    if hist[-1] < tol:
        return PdeResult(ScalarField(chart, u), hist[-1], max_newton, hist)
    raise SolverError(f"Newton did not converge: residual {hist[-1]:.3e}",
                      residual=hist[-1], iterations=max_newton)


def pde_solve_torus(chart, c, u_init, tol=1e-8, max_newton=30):
    """Solution of 2 Delta u - (u^2 - c^2) = 0 reached by Newton from u_init."""
    return pde_newton(chart, c, u_init, tol, max_newton).u


def pde_residual(u, c):
    """L2 norm of 2 Delta u - (u^2 - c^2) on the flat metric of u's chart."""
    g = _flat_metric(u.chart)
    x = np.broadcast_to(u.values, u.chart.shape)
    r = 2.0 * _lap_array(x, g) - (x * x - float(c) ** 2)
    return float(np.sqrt(u.chart.quad(r * r)))


def embed_ode_profile(orbit, chart, axis, tol=1e-6):
    """Sample a periodic orbit along one torus axis, constant along the others.

    The axis period must be within ``tol`` (relative) of k orbit periods for a
    positive integer k; time is then rescaled so exactly k waves fit.
    """
    if chart.kinds[axis] != "periodic":
        raise PreconditionError("embedding needs a periodic axis")
    shp = [1] * chart.n
    shp[axis] = chart.shape[axis]
    if orbit.period is None:
        if orbit.constant:
            return ScalarField(chart, np.full(shp, orbit.u0))
        raise PreconditionError("orbit is neither periodic nor constant")
    L, T = chart.extents[axis], orbit.period
    k = int(round(L / T))
    if k < 1 or abs(k * T - L) > tol * L:
        raise PreconditionError(
            f"period mismatch: axis period {L!r} is not a multiple of the orbit period {T!r}")
    N = chart.shape[axis]
    dt_node = k * T / N
    sub = max(1, int(math.ceil(dt_node / (T / 2000.0))))
    h = dt_node / sub
    c2 = orbit.c**2
    u, v = orbit.u0, orbit.v0
    vals = np.empty(N)
    for j in range(N):
        vals[j] = u
        for _ in range(sub):
            u, v = _rk4(c2, u, v, h)
    return ScalarField(chart, vals.reshape(shp))


def trace_equation_scaling(n, pi_s2):
    """Map the trace equation with constant coefficients onto the model PDE.

    With s = alpha u and alpha = -(2n - 2)/(n - 4), the equation
    (2n-2) Delta s + (n-4)/2 (s^2 - pi(s^2)) = 0 becomes
    2 Delta u - (u^2 - c^2) = 0 with c^2 = pi(s^2)/alpha^2.
    Returns ``(alpha, c)``.
    """
    if n == 4:
        raise PreconditionError("for n = 4 the trace equation is linear (b_n = 0)")
    alpha = -(2.0 * n - 2.0) / (n - 4.0)
    return alpha, math.sqrt(pi_s2) / abs(alpha)
