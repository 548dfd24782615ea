"""Levi-Civita calculus on grid metrics.

Curvature is assembled algebraically from first and second partial
derivatives of the metric components; Christoffel symbols are never
differentiated numerically.  Second-order operators acting on functions and
one-forms use the divergence form with the signed volume density, which makes
them exactly self-adjoint (and exactly adjoint to each other) under the grid
quadrature on tori.

Sign conventions: the Laplacian is the geometer's ``-div grad`` with a
nonnegative spectrum, and the divergence of a symmetric 2-tensor is
``(delta h)_j = -g^{ik} nabla_k h_ij``, so that ``delta r = -ds/2``.
"""

import numpy as np

from .fields import ScalarField, SymTensorField, VectorField, l2_norm, pack, unpack


class ChristoffelField:
    """Christoffel symbols of the second kind, symmetric lower pair stored packed.

    ``values[k, p]`` holds Gamma^k_ij for the packed index p of (i, j).
    """

    def __init__(self, chart, values):
        self.chart = chart
        self.values = values

    def full(self):
        n = self.chart.n
        return np.stack([unpack(self.values[k], n) for k in range(n)])


def _freeze(a):
    a.setflags(write=False)
    return a


def _cached(g, key, fn):
    if key not in g._cache:
        g._cache[key] = fn()
    return g._cache[key]


def metric_derivatives(g):
    """dg[m, a, b] = d_m g_ab."""
    def build():
        ch, n = g.chart, g.n
        packed = g.tensor.values
        return _freeze(np.stack([unpack(ch.d1(packed, m), n) for m in range(n)]))
    return _cached(g, "dg", build)


def _gamma_lower(g):
    """Gamma_{l,ij} = (d_i g_lj + d_j g_li - d_l g_ij) / 2."""
    def build():
        dg = metric_derivatives(g)
        return _freeze(0.5 * (np.einsum("ilj...->lij...", dg)
                              + np.einsum("jli...->lij...", dg) - dg))
    return _cached(g, "gamma_lower", build)


def _gamma(g):
    def build():
        return _freeze(np.einsum("kl...,lij...->kij...", g.ginv, _gamma_lower(g)))
    return _cached(g, "gamma", build)


def christoffel(g):
    """Christoffel symbols Gamma^k_ij of the Levi-Civita connection."""
    G = _gamma(g)
    return ChristoffelField(g.chart, np.stack([pack(G[k]) for k in range(g.n)]))


def _ricci_array(g):
    ch, n = g.chart, g.n
    ginv, dg = g.ginv, metric_derivatives(g)
    G1, G2 = _gamma_lower(g), _gamma(g)
    packed = g.tensor.values

    # first-derivative terms
    M = np.einsum("ka...,jab...,bl...->jkl...", ginv, dg, ginv)   # -(d_j g^kl)
    c = -np.einsum("kkl...->l...", M)                               # d_k g^kl
    R = np.einsum("l...,lij...->ij...", c, G1)
    R = R + 0.5 * np.einsum("jkl...,ilk...->ij...", M, dg)
    trG = np.einsum("kkl...->l...", G2)
    R = R + np.einsum("l...,lij...->ij...", trG, G2)
    R = R - np.einsum("kjl...,lik...->ij...", G2, G2)

    # second-derivative terms, one coordinate pair at a time
    shape = np.broadcast_shapes(R.shape, (n, n) + packed.shape[1:])
    T1 = np.zeros(shape)
    T3 = np.zeros(shape)
    T4 = np.zeros(shape)
    for m in range(n):
        for p in range(m, n):
            H = unpack(ch.d11(packed, m, p), n)  # H[a, b] = d_m d_p g_ab
            w = 1.0 if m == p else 2.0
            T3 = T3 + w * ginv[m, p] * H
            t4 = np.einsum("kl...,kl...->...", ginv, H)
            T4[m, p] = T4[m, p] + t4
            if m != p:
                T4[p, m] = T4[p, m] + t4
            # T1_ij = g^kl d_k d_i g_lj with (k, i) = (m, p) and (p, m)
            T1[p] = T1[p] + np.einsum("l...,lj...->j...", ginv[m], H)
            if m != p:
                T1[m] = T1[m] + np.einsum("l...,lj...->j...", ginv[p], H)
    R = R + 0.5 * (T1 + np.swapaxes(T1, 0, 1) - T3) - 0.5 * T4
    return 0.5 * (R + np.swapaxes(R, 0, 1))


def ricci(g):
    """Ricci tensor r_g."""
    R = _cached(g, "ricci", lambda: _freeze(_ricci_array(g)))
    return SymTensorField(g.chart, pack(R))


def scalar_curvature(g):
    """Scalar curvature s_g = (g, r_g)_g."""
    def build():
        return _freeze(np.einsum("ij...,ij...->...", g.ginv, _cached(
            g, "ricci", lambda: _freeze(_ricci_array(g)))))
    return ScalarField(g.chart, _cached(g, "scal", build))


def _sign(chart):
    return 1.0 if chart.sign_convention == "geometer" else -1.0


def _lap_array(f, g):
    """Geometer Laplacian of an array sampled on g's chart."""
    ch, n = g.chart, g.n
    rho = g.signed_density
    A = rho * g.ginv
    Abar = A.reshape(n, n, -1).mean(axis=-1)
    out = 0.0
    flux = [0.0] * n
    for i in range(n):
        for j in range(n):
            if Abar[i, j] != 0.0:
                out = out + Abar[i, j] * ch.d11(f, i, j)
    dfs = [ch.d1(f, j) for j in range(n)]
    for i in range(n):
        for j in range(n):
            flux[i] = flux[i] + (A[i, j] - Abar[i, j]) * dfs[j]
        out = out + ch.d1(flux[i], i)
    return -_sign(ch) * out / rho


def laplacian(f, g):
    """Delta_g f = -div_g grad_g f (nonnegative spectrum)."""
    return ScalarField(g.chart, _lap_array(f.values, g))


def gradient(f, g):
    """Metric gradient grad_g f as a contravariant vector field."""
    df = np.stack(np.broadcast_arrays(*[g.chart.d1(f.values, a) for a in range(g.n)]))
    return VectorField(g.chart, np.einsum("ij...,j...->i...", g.ginv, df))


def _hess_array(f, g):
    ch, n = g.chart, g.n
    G = _gamma(g)
    df = [ch.d1(f, k) for k in range(n)]
    H = np.zeros((n, n) + np.broadcast_shapes(np.shape(f), G.shape[3:]))
    for i in range(n):
        for j in range(i, n):
            hij = ch.d11(f, i, j)
            for k in range(n):
                hij = hij - G[k, i, j] * df[k]
            H[i, j] = hij
            H[j, i] = hij
    return H


def hessian(f, g):
    """Covariant Hessian nabla_g d f."""
    return SymTensorField(g.chart, pack(_hess_array(f.values, g)))


def _div_tensor_array(H, g):
    """Covariant components (delta h)_j of a full symmetric tensor array."""
    ch, n = g.chart, g.n
    rho = g.signed_density
    ginv = g.ginv
    mixed = np.einsum("ik...,kj...->ij...", ginv, H)          # h^i_j
    hup = np.einsum("ja...,ab...->jb...", mixed, ginv)         # h^{ib} (symmetric)
    dg = metric_derivatives(g)
    out = []
    for j in range(n):
        dv = 0.0
        for i in range(n):
            dv = dv + ch.d1(rho * mixed[i, j], i)
        corr = 0.5 * np.einsum("ab...,ab...->...", dg[j], hup)
        out.append(-dv / rho + corr)
    return _sign(ch) * np.stack(np.broadcast_arrays(*out))


def divergence(h, g):
    """delta_g h = -g^{ik} nabla_k h_ij, returned raised to a vector field."""
    low = _div_tensor_array(h.full(), g)
    return VectorField(g.chart, np.einsum("ij...,j...->i...", g.ginv, low))


def vector_divergence(X, g):
    """div_g X = (1/rho) d_k(rho X^k)."""
    ch = g.chart
    rho = g.signed_density
    out = 0.0
    for k in range(g.n):
        out = out + ch.d1(rho * X.values[k], k)
    return ScalarField(ch, out / rho * np.ones_like(rho))


def lie_derivative_metric(X, g):
    """L_X g in coordinates: X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k."""
    ch, n = g.chart, g.n
    dg = metric_derivatives(g)
    dX = np.stack(np.broadcast_arrays(*[ch.d1(X.values, i) for i in range(n)]))  # dX[i, k]
    L = np.einsum("k...,kij...->ij...", X.values, dg)
    t = np.einsum("kj...,ik...->ij...", g.g, dX)
    L = L + t + np.swapaxes(t, 0, 1)
    return L


def delta_star(X, g):
    """Formal adjoint of the divergence: (1/2) L_X g = sym(nabla X^flat)."""
    return SymTensorField(g.chart, pack(0.5 * lie_derivative_metric(X, g)))


def conformal_residual(X, g):
    """||L_X g - (2/n)(div X) g||_{L2}; zero iff X is conformal for g."""
    L = lie_derivative_metric(X, g)
    div = vector_divergence(X, g).values
    res = L - (2.0 / g.n) * div * g.g
    return l2_norm(SymTensorField(g.chart, pack(res)), g)


def bianchi_residual(g):
    """delta_g r_g + (1/2) grad s_g as a vector field."""
    return divergence(ricci(g), g) + 0.5 * gradient(scalar_curvature(g), g)
