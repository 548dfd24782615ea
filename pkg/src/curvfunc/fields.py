"""Tensor fields sampled on a :class:`~curvfunc.grid.GridChart`.

Symmetric 2-tensors store only their upper triangle, in the row-major order
of ``np.triu_indices(n)``.  The spatial axes of every array may have length
one, in which case the field is constant along that direction.
"""

import numpy as np

from .errors import GridError, MetricError


def sym_index(n):
    """Map (i, j) -> packed position for an n x n symmetric tensor."""
    iu = np.triu_indices(n)
    idx = np.empty((n, n), dtype=int)
    idx[iu] = np.arange(len(iu[0]))
    idx[(iu[1], iu[0])] = np.arange(len(iu[0]))
    return idx


def pack(full):
    """(n, n, ...) symmetric array -> (n(n+1)/2, ...) upper triangle."""
    n = full.shape[0]
    iu = np.triu_indices(n)
    return np.asarray(full)[iu]


def unpack(packed, n):
    """(n(n+1)/2, ...) upper triangle -> (n, n, ...) symmetric array."""
    idx = sym_index(n)
    return np.asarray(packed)[idx]


def _as_spatial(chart, values, lead=()):
    values = np.asarray(values, dtype=float)
    if values.ndim == len(lead):
        values = values.reshape(tuple(lead) + (1,) * chart.n)
    if values.shape[: len(lead)] != tuple(lead) or values.ndim != len(lead) + chart.n:
        raise GridError(
            f"field array of shape {values.shape} does not fit chart of dimension {chart.n}")
    try:
        np.broadcast_shapes(values.shape[len(lead):], chart.shape)
    except ValueError:
        raise GridError(f"field shape {values.shape} incompatible with chart {chart.shape}")
    if not np.all(np.isfinite(values)):
        raise GridError("field values must be finite")
    return values


class _Field:
    __slots__ = ("chart", "values")
    _lead = 0

    def __setattr__(self, name, value):
        if hasattr(self, name):
            raise AttributeError(f"{type(self).__name__} is immutable")
        object.__setattr__(self, name, value)

    def _check(self, other):
        if isinstance(other, _Field):
            if other.chart != self.chart:
                raise GridError("fields live on different charts")
            return other.values
        return other

    def _new(self, values):
        return type(self)(self.chart, values)

    def _scalar_factor(self, other):
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise GridError("fields live on different charts")
            return other.values
        if isinstance(other, _Field):
            return NotImplemented
        return other

    def __add__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        return self._new(self.values + self._check(other))

    def __sub__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        return self._new(self.values - self._check(other))

    def __mul__(self, other):
        f = self._scalar_factor(other)
        if f is NotImplemented:
            return NotImplemented
        return self._new(self.values * f)

    __rmul__ = __mul__

    def __truediv__(self, other):
        f = self._scalar_factor(other)
        if f is NotImplemented:
            return NotImplemented
        return self._new(self.values / f)

    def __neg__(self):
        return self._new(-self.values)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.values.shape})"

    def expanded(self):
        """Values broadcast to the full stored grid shape."""
        lead = self.values.shape[: self.values.ndim - self.chart.n]
        return np.broadcast_to(self.values, lead + self.chart.shape)


class ScalarField(_Field):
    """One real value per node."""

    __slots__ = ()

    def __init__(self, chart, values):
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "values", _as_spatial(chart, values))

    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._new(self.values + other)
        return super().__add__(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._new(self.values - other)
        return super().__sub__(other)

    def __rsub__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._new(other - self.values)
        return NotImplemented

    def __pow__(self, p):
        return self._new(self.values**p)

    def min(self):
        return float(np.min(np.broadcast_to(self.values, self.chart.shape)[self.chart.mask]))

    def max(self):
        return float(np.max(np.broadcast_to(self.values, self.chart.shape)[self.chart.mask]))


class VectorField(_Field):
    """Contravariant vector field, components ``values[k]``."""

    __slots__ = ()

    def __init__(self, chart, values):
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "values", _as_spatial(chart, values, (chart.n,)))


class SymTensorField(_Field):
    """Covariant symmetric 2-tensor field, upper triangle stored."""

    __slots__ = ()

    def __init__(self, chart, values):
        m = chart.n * (chart.n + 1) // 2
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "values", _as_spatial(chart, values, (m,)))

    @classmethod
    def from_full(cls, chart, full, atol=1e-12):
        full = np.asarray(full, dtype=float)
        if full.ndim >= 2:
            asym = np.max(np.abs(full - np.swapaxes(full, 0, 1)), initial=0.0)
            if asym > atol * max(1.0, np.max(np.abs(full), initial=0.0)):
                raise GridError(f"tensor is not symmetric (defect {asym:.3e})")
        return cls(chart, pack(full))

    def full(self):
        return unpack(self.values, self.chart.n)

    def __mul__(self, other):
        return super().__mul__(other)

    __rmul__ = __mul__


class MetricField:
    """Riemannian metric with cached inverse, density and volume.

    Parameters
    ----------
    tensor : SymTensorField
        Metric components.
    spd_floor : float
        Smallest admissible eigenvalue; violations raise :class:`MetricError`.
    """

    def __init__(self, tensor, spd_floor=1e-10):
        if not isinstance(tensor, SymTensorField):
            raise TypeError("MetricField expects a SymTensorField")
        self.tensor = tensor
        self.chart = tensor.chart
        self.spd_floor = spd_floor
        n = self.chart.n
        g = tensor.full()
        gm = np.moveaxis(g, (0, 1), (-2, -1))
        eig = np.linalg.eigvalsh(gm)
        lo = eig[..., 0]
        if not np.all(lo > spd_floor):
            where = np.unravel_index(np.argmin(lo), lo.shape)
            raise MetricError(
                f"metric is not positive definite: eigenvalue {lo[where]:.3e} "
                f"<= floor {spd_floor:.1e} at node {tuple(int(i) for i in where)}")
        inv = np.linalg.inv(gm)
        defect = np.max(np.abs(gm @ inv - np.eye(n)))
        cond = float(np.max(eig[..., -1] / lo))
        if defect > max(1e-12, 10 * np.finfo(float).eps * cond):
            raise MetricError(f"metric inverse defect {defect:.3e}")
        self._g = g
        self._ginv = np.moveaxis(inv, (-2, -1), (0, 1))
        self._sqrt_det = np.sqrt(np.prod(eig, axis=-1))
        self._eig_range = (float(np.min(lo)), float(np.max(eig[..., -1])))
        self._cache = {}

    @classmethod
    def from_full(cls, chart, full, spd_floor=1e-10):
        return cls(SymTensorField.from_full(chart, full), spd_floor)

    @property
    def n(self):
        return self.chart.n

    @property
    def g(self):
        """Full component array (n, n, ...)."""
        return self._g

    @property
    def ginv(self):
        return self._ginv

    @property
    def density(self):
        """Riemannian volume density sqrt(det g) (positive)."""
        return self._sqrt_det

    @property
    def signed_density(self):
        """Density times the chart orientation; smooth across chart poles."""
        return self._sqrt_det * self.chart.orientation

    @property
    def eigenvalue_range(self):
        """Smallest and largest metric eigenvalue over the grid."""
        return self._eig_range

    @property
    def volume(self):
        if "volume" not in self._cache:
            self._cache["volume"] = self.chart.quad(self._sqrt_det)
        return self._cache["volume"]

    def scaled(self, c):
        return MetricField(self.tensor * float(c), self.spd_floor)

    def __repr__(self):
        return f"MetricField(n={self.n}, chart_shape={self.chart.shape})"


# ----------------------------------------------------------------------
# pointwise algebra and quadrature


def _same_chart(*objs):
    c = objs[0].chart
    for o in objs[1:]:
        if o.chart != c:
            raise GridError("fields live on different charts")
    return c


def partial_derivative(f, axis):
    """Coordinate partial derivative of a scalar field."""
    return ScalarField(f.chart, f.chart.d1(f.values, axis))


def integrate(f, g, masked=False):
    """Integral of f against the Riemannian volume of g."""
    chart = _same_chart(f, g)
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    return chart.quad(vals * g.density, masked=masked)


def pointwise_inner(a, b, g):
    """The g-inner product a_ij b_pq g^ip g^jq of symmetric tensors."""
    _same_chart(a, b, g)
    return ScalarField(g.chart, _inner_full(a.full(), b.full(), g.ginv))


def _inner_full(A, B, ginv):
    AG = np.einsum("ik...,kj...->ij...", ginv, A)
    BG = np.einsum("ik...,kj...->ij...", ginv, B)
    return np.einsum("ij...,ji...->...", AG, BG)


def trace(h, g):
    """trace_g h = (g, h)_g."""
    _same_chart(h, g)
    return ScalarField(g.chart, np.einsum("ij...,ij...->...", g.ginv, h.full()))


def trace_free_part(h, g):
    """z_g(h) = h - ((g,h)_g / n) g."""
    tr = trace(h, g).values
    return SymTensorField(g.chart, h.values - (tr / g.n) * g.tensor.values)


def project_constants(f, g):
    """L2(dmu_g) projection onto constants: the dmu_g-average of f."""
    return integrate(f, g) / g.volume


def normalize_volume(g):
    """Rescale g by Vol^(-2/n) so that the volume is one."""
    vol = g.volume
    if not vol > 0:
        raise MetricError("volume must be positive")
    return g.scaled(vol ** (-2.0 / g.n))


def l2_norm(f, g, masked=True):
    """L2(dmu_g) norm of a scalar, vector or symmetric tensor field.

    On charts the pole-excision mask applies by default.
    """
    chart = g.chart
    if isinstance(f, ScalarField):
        sq = f.values**2
    elif isinstance(f, VectorField):
        sq = np.einsum("ij...,i...,j...->...", g.g, f.values, f.values)
    elif isinstance(f, SymTensorField):
        F = f.full()
        sq = _inner_full(F, F, g.ginv)
    else:
        sq = np.asarray(f, dtype=float) ** 2
    return float(np.sqrt(max(chart.quad(sq * g.density, masked=masked), 0.0)))


def linf_norm(f, g, masked=True):
    """Maximum pointwise g-norm over the (masked) grid."""
    if isinstance(f, ScalarField):
        a = np.abs(f.values)
    elif isinstance(f, VectorField):
        a = np.sqrt(np.einsum("ij...,i...,j...->...", g.g, f.values, f.values))
    elif isinstance(f, SymTensorField):
        F = f.full()
        a = np.sqrt(np.abs(_inner_full(F, F, g.ginv)))
    else:
        a = np.abs(np.asarray(f, dtype=float))
    a = np.broadcast_to(a, g.chart.shape)
    return float(np.max(a[g.chart.mask] if masked else a))


def field_norm(f, g, norm="L2"):
    if norm == "L2":
        return l2_norm(f, g)
    if norm in ("Linf", "inf"):
        return linf_norm(f, g)
    raise ValueError(f"unknown norm {norm!r}")
