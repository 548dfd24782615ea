"""Krylov solvers in a weighted inner product.

Operators on grid functions that are self-adjoint for the quadrature inner
product ``<x, y> = sum(w * x * y)`` are solved by preconditioned conjugate
gradients in that inner product.  When CG meets a direction of nonpositive
curvature the solve is handed to SciPy's MINRES on the symmetrized system
``W^(1/2) A W^(-1/2)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from .errors import SolverError


@dataclass
class KrylovInfo:
    iterations: int
    residual: float
    method: str
    negative_curvature: bool = False


def flat_inverse(chart, shift=0.0):
    """Inverse of (coordinate Laplacian + shift) by FFT; the zero mode is dropped."""
    sym = chart.flat_laplacian_symbol + shift
    inv = np.zeros_like(sym)
    nz = np.abs(sym) > 1e-12 * max(1.0, float(np.max(np.abs(sym))))
    inv[nz] = 1.0 / sym[nz]

    def apply(y):
        y = np.broadcast_to(y, chart.shape)
        return np.real(np.fft.ifftn(np.fft.fftn(y) * inv))
    return apply


class _Space:
    def __init__(self, w, project):
        self.w = w
        self.project = project
        self.wsum = float(np.sum(w))

    def dot(self, a, b):
        return float(np.sum(self.w * a * b))

    def P(self, x):
        if not self.project:
            return x
        return x - self.dot(x, np.ones_like(x)) / self.wsum


def weighted_pcg(apply_A, b, w, precond=None, tol=1e-10, maxiter=None, project=False):
    """Solve A x = b with CG in the w-weighted inner product.

    ``precond`` is applied as ``precond(w * r)``, which keeps it self-adjoint in
    that inner product when ``precond`` is Euclidean-symmetric.  With
    ``project=True`` the solve is restricted to w-mean-zero functions.
    Returns ``(x, info)``; on negative curvature falls back to MINRES.
    """
    sp = _Space(w, project)
    b = sp.P(np.array(b, dtype=float))
    if maxiter is None:
        maxiter = max(50, int(10 * np.sqrt(b.size)))
    bnorm = np.sqrt(sp.dot(b, b))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, KrylovInfo(0, 0.0, "cg")

    def M(r):
        return sp.P(precond(w * r)) if precond is not None else r

    def A(v):
        return sp.P(apply_A(sp.P(v)))

    r = b.copy()
    z = M(r)
    p = z.copy()
    rz = sp.dot(r, z)
    for it in range(1, maxiter + 1):
        Ap = A(p)
        pAp = sp.dot(p, Ap)
        if pAp <= 0.0:
            return weighted_minres(apply_A, b, w, precond, tol, maxiter, project,
                                   negative_curvature=True)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rn = np.sqrt(sp.dot(r, r))
        if rn <= tol * bnorm:
            # true residual check guards against drift in the recurrence
            rt = b - A(x)
            rtn = np.sqrt(sp.dot(rt, rt))
            if rtn <= 10 * tol * bnorm:
                return x, KrylovInfo(it, rtn / bnorm, "cg")
            r = rt
        z = M(r)
        rz_new = sp.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {maxiter} iterations",
                      residual=rn / bnorm, iterations=maxiter)


def weighted_minres(apply_A, b, w, precond=None, tol=1e-10, maxiter=None, project=False,
                    negative_curvature=False):
    """MINRES for w-self-adjoint, possibly indefinite operators."""
    sp = _Space(w, project)
    shape = np.shape(b)
    b = sp.P(np.array(b, dtype=float))
    if maxiter is None:
        maxiter = max(50, int(10 * np.sqrt(b.size)))
    sw = np.sqrt(w)
    bt = (sw * b).ravel()
    bnorm = np.linalg.norm(bt)
    if bnorm == 0.0:
        return np.zeros(shape), KrylovInfo(0, 0.0, "minres", negative_curvature)

    def At(y):
        x = y.reshape(shape) / sw
        return (sw * sp.P(apply_A(sp.P(x)))).ravel()

    Aop = LinearOperator((b.size, b.size), matvec=At, dtype=float)
    Mop = None
    if precond is not None:
        def Mt(y):
            x = sp.P(y.reshape(shape) / sw)
            return (sw * sp.P(precond(w * x))).ravel()
        Mop = LinearOperator((b.size, b.size), matvec=Mt, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    y, flag = minres(Aop, bt, M=Mop, rtol=tol, maxiter=maxiter, callback=cb)
    x = sp.P(y.reshape(shape) / sw)
    res = np.linalg.norm(At((sw * x).ravel()) - bt) / bnorm
    if flag != 0 and res > 10 * tol:
        raise SolverError(f"MINRES did not converge (flag {flag}, residual {res:.3e})",
                          residual=res, iterations=count[0])
    return x, KrylovInfo(count[0], float(res), "minres", negative_curvature)
