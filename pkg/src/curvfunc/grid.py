"""Grids and coordinate charts.

A :class:`GridChart` describes a box of coordinates sampled on a uniform
grid.  Four axis kinds are supported:

``periodic``
    A torus direction with the given period.  Nodes sit at ``j*h``.
``polar``
    A polar angle on ``[0, pi]`` whose metric coefficients involve
    ``sin(theta)`` to odd powers in the volume density.  The axis is stored on
    the reflected periodic extension ``[0, 2*pi)`` with nodes at
    ``(j + 1/2) h`` so that both poles fall half-way between nodes.
``polar_even``
    Like ``polar`` but with a volume density that is even in the angle (the
    ``chi`` angle of the three-sphere, density ``sin(chi)**2``).
``azimuth``
    A rotation angle on ``[0, 2*pi)``.  All chart models are rotationally
    symmetric, so fields are stored with a single node along this axis and
    derivatives along it vanish.

Field arrays carry the ``n`` spatial axes last; leading axes index tensor
components.  A spatial axis of length one broadcasts and is treated as
constant along that direction.
"""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import GridError

AXIS_KINDS = ("periodic", "polar", "polar_even", "azimuth")
ORDERS = (2, 4, 6, "spectral")
SIGN_CONVENTIONS = ("geometer", "analyst")

# one-sided halves of the central stencils, offsets 1..m
_FIRST = {
    2: (0.5,),
    4: (2.0 / 3.0, -1.0 / 12.0),
    6: (3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0),
}
_SECOND = {
    2: (1.0,),
    4: (4.0 / 3.0, -1.0 / 12.0),
    6: (3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0),
}


def _fejer_polar_weights(N):
    """Fejer-type weights for the integral of F(theta) sin(theta) over [0, pi].

    Nodes are the midpoints theta_j = (j + 1/2) pi / N, j < N.
    """
    theta = (np.arange(N) + 0.5) * np.pi / N
    k = np.arange(1, N // 2 + 1)
    corr = np.cos(2.0 * np.outer(theta, k)) / (4.0 * k**2 - 1.0)
    return theta, (2.0 / N) * (1.0 - 2.0 * corr.sum(axis=1))


@dataclass(frozen=True)
class GridChart:
    """Uniform grid on a coordinate box.

    Parameters
    ----------
    kinds : tuple of str
        Axis kind per coordinate, see the module docstring.
    resolution : tuple of int
        Nodes per axis extent.  Even and at least 16.
    extents : tuple of float
        Coordinate extent per axis: the period for ``periodic`` axes, ``pi``
        for polar axes and ``2*pi`` for azimuth axes.
    order : int or "spectral"
        Central finite-difference order (2, 4 or 6) or Fourier
        differentiation.
    sign_convention : str
        ``"geometer"`` (Laplacian ``-div grad``, the default) or
        ``"analyst"``.  The latter flips the Laplacian and the divergence and
        exists only as a debugging canary.
    """

    kinds: tuple
    resolution: tuple
    extents: tuple
    order: object = 4
    sign_convention: str = "geometer"

    def __post_init__(self):
        kinds = tuple(self.kinds)
        res = tuple(int(r) for r in np.broadcast_to(self.resolution, (len(kinds),)))
        ext = tuple(float(e) for e in np.broadcast_to(self.extents, (len(kinds),)))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "extents", ext)
        if not 2 <= len(kinds) <= 5:
            raise GridError(f"dimension must be between 2 and 5, got {len(kinds)}")
        for k in kinds:
            if k not in AXIS_KINDS:
                raise GridError(f"unknown axis kind {k!r}")
        for r in res:
            if r < 16 or r % 2:
                raise GridError(f"resolution must be even and >= 16, got {r}")
        for e in ext:
            if not np.isfinite(e) or e <= 0:
                raise GridError(f"extents must be positive, got {e}")
        if self.order not in ORDERS:
            raise GridError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise GridError(f"unknown sign convention {self.sign_convention!r}")

    # ------------------------------------------------------------------
    # geometry of the grid
    @property
    def n(self):
        return len(self.kinds)

    @property
    def spacing(self):
        return tuple(e / r for e, r in zip(self.extents, self.resolution))

    @property
    def shape(self):
        """Stored array shape of a generic field."""
        out = []
        for k, r in zip(self.kinds, self.resolution):
            out.append({"periodic": r, "azimuth": 1}.get(k, 2 * r))
        return tuple(out)

    @property
    def node_count(self):
        return int(np.prod(self.shape))

    @property
    def is_torus(self):
        return all(k == "periodic" for k in self.kinds)

    @property
    def pole_margin(self):
        """Excision margin in nodes: two stencil half-widths."""
        return 2 if self.order == "spectral" else int(self.order)

    def with_order(self, order):
        return replace(self, order=order)

    def with_sign_convention(self, convention):
        return replace(self, sign_convention=convention)

    def describe(self):
        return {
            "kinds": list(self.kinds),
            "resolution": list(self.resolution),
            "extents": list(self.extents),
            "order": self.order,
        }

    def axis_coordinates(self, axis):
        kind, h = self.kinds[axis], self.spacing[axis]
        if kind == "azimuth":
            return np.zeros(1)
        if kind == "periodic":
            return np.arange(self.resolution[axis]) * h
        return (np.arange(2 * self.resolution[axis]) + 0.5) * h

    def _along(self, axis, values):
        shp = [1] * self.n
        shp[axis] = len(values)
        return np.asarray(values, dtype=float).reshape(shp)

    def coordinates(self):
        """Broadcastable coordinate arrays, one per axis."""
        return [self._along(a, self.axis_coordinates(a)) for a in range(self.n)]

    @cached_property
    def orientation(self):
        """Sign making the signed volume density smooth across chart poles."""
        out = np.ones((1,) * self.n)
        for a, k in enumerate(self.kinds):
            if k == "polar":
                out = out * self._along(a, np.sign(np.sin(self.axis_coordinates(a))))
        return out

    @cached_property
    def _axis_weights(self):
        ws = []
        for a, (k, h, r) in enumerate(zip(self.kinds, self.spacing, self.resolution)):
            if k == "periodic":
                w = np.full(r, h)
            elif k == "azimuth":
                w = np.array([self.extents[a]])
            elif k == "polar_even":
                # doubled copy of [0, pi]; midpoint rule is spectral here
                w = np.full(2 * r, 0.5 * h)
            else:
                # Fejer weights divided by the |sin| already in the density;
                # the mirrored half duplicates the data, hence the factor 1/2
                # (the weights are symmetric under theta -> pi - theta)
                theta, W = _fejer_polar_weights(r)
                w = W / (2.0 * np.sin(theta))
                w = np.concatenate([w, w])
            ws.append(self._along(a, w))
        return ws

    @cached_property
    def mask(self):
        """Boolean array of nodes kept by the pole excision (all True on tori)."""
        m = np.ones(self.shape, dtype=bool)
        for a, k in enumerate(self.kinds):
            if k in ("polar", "polar_even"):
                th = self.axis_coordinates(a) % np.pi
                d = np.minimum(th, np.pi - th)
                keep = d > self.pole_margin * self.spacing[a] * (1 - 1e-12)
                m = m & self._along(a, keep).astype(bool)
        return m

    @cached_property
    def weights(self):
        """Quadrature weights per node, to be multiplied by |volume density|."""
        w = np.ones((1,) * self.n)
        for wa in self._axis_weights:
            w = w * wa
        return np.broadcast_to(w, self.shape)

    def quad(self, values, masked=False):
        """Sum of ``values`` against the coordinate quadrature weights."""
        w = self.weights
        if masked:
            w = w * self.mask
        return float(np.sum(np.broadcast_to(values, self.shape) * w))

    # ------------------------------------------------------------------
    # derivatives
    def _spatial_axis(self, arr, axis):
        if not 0 <= axis < self.n:
            raise GridError(f"axis {axis} out of range for dimension {self.n}")
        return arr.ndim - self.n + axis

    def d1(self, arr, axis):
        """First partial derivative of an array along a chart axis."""
        arr = np.asarray(arr, dtype=float)
        ax = self._spatial_axis(arr, axis)
        N = arr.shape[ax]
        if N == 1:
            return np.zeros_like(arr)
        h = self.spacing[axis]
        if self.order == "spectral":
            k = 2.0 * np.pi * np.fft.rfftfreq(N, d=h)
            mult = 1j * k
            if N % 2 == 0:
                mult[-1] = 0.0
            return self._fourier(arr, ax, mult)
        out = np.zeros_like(arr)
        for o, w in enumerate(_FIRST[self.order], start=1):
            out += w * (np.roll(arr, -o, axis=ax) - np.roll(arr, o, axis=ax))
        return out / h

    def d2(self, arr, axis):
        """Second partial derivative along one axis (compact stencil)."""
        arr = np.asarray(arr, dtype=float)
        ax = self._spatial_axis(arr, axis)
        N = arr.shape[ax]
        if N == 1:
            return np.zeros_like(arr)
        h = self.spacing[axis]
        if self.order == "spectral":
            k = 2.0 * np.pi * np.fft.rfftfreq(N, d=h)
            return self._fourier(arr, ax, -(k**2))
        out = np.zeros_like(arr)
        for o, w in enumerate(_SECOND[self.order], start=1):
            out += w * (np.roll(arr, -o, axis=ax) - 2.0 * arr + np.roll(arr, o, axis=ax))
        return out / h**2

    def d11(self, arr, i, j):
        """Mixed or repeated second partial derivative."""
        if i == j:
            return self.d2(arr, i)
        return self.d1(self.d1(arr, j), i)

    @staticmethod
    def _fourier(arr, ax, mult):
        shp = [1] * arr.ndim
        shp[ax] = len(mult)
        fh = np.fft.rfft(arr, axis=ax) * mult.reshape(shp)
        return np.fft.irfft(fh, n=arr.shape[ax], axis=ax)

    def d2_symbol(self, axis):
        """Eigenvalues of minus the compact second difference, FFT ordering."""
        N, h = self.shape[axis], self.spacing[axis]
        k = 2.0 * np.pi * np.fft.fftfreq(N, d=h)
        if N == 1:
            return np.zeros(1)
        if self.order == "spectral":
            return k**2
        out = np.zeros(N)
        for o, w in enumerate(_SECOND[self.order], start=1):
            out += w * (2.0 - 2.0 * np.cos(k * o * h))
        return out / h**2

    @cached_property
    def flat_laplacian_symbol(self):
        """Symbol of the coordinate Laplacian on the stored grid (>= 0)."""
        sym = np.zeros(self.shape)
        for a in range(self.n):
            sym = sym + self._along(a, self.d2_symbol(a))
        return sym


def build_torus_grid(n, resolution, periods=None, order=4):
    """Periodic grid on the torus with the given periods (default all ones)."""
    if not isinstance(n, (int, np.integer)) or not 2 <= n <= 5:
        raise GridError(f"torus dimension must be an integer in 2..5, got {n!r}")
    if periods is None:
        periods = (1.0,) * n
    periods = tuple(np.broadcast_to(np.asarray(periods, dtype=float), (n,)))
    res = np.broadcast_to(np.asarray(resolution), (n,))
    if any(int(r) != r for r in res):
        raise GridError(f"resolution must be an integer, got {resolution!r}")
    return GridChart(("periodic",) * n, tuple(int(r) for r in res), periods, order)


def sphere_chart_grid(n, resolution, order=6):
    """Angular coordinate box of the round n-sphere (n in {2, 3})."""
    if n == 2:
        kinds, ext = ("polar", "azimuth"), (np.pi, 2 * np.pi)
    elif n == 3:
        kinds, ext = ("polar_even", "polar", "azimuth"), (np.pi, np.pi, 2 * np.pi)
    else:
        raise GridError(f"sphere charts exist for n in {{2, 3}}, got {n}")
    return GridChart(kinds, (resolution,) * n, ext, order)


def product_chart(a, b):
    """Chart of a Riemannian product: axes of ``a`` followed by axes of ``b``."""
    if a.order != b.order:
        raise GridError("product factors must share a derivative order")
    return GridChart(a.kinds + b.kinds, a.resolution + b.resolution,
                     a.extents + b.extents, a.order, a.sign_convention)
