"""Sampled functions on uniform lattices in exponential coordinates.

Haar measure is Lebesgue measure in these coordinates, so quadrature is a
plain Riemann sum with the cell volume.  Functions are extended by zero
outside the box.  Convolution uses the group law pointwise; on abelian
groups with a sampled (or analytically evaluable) kernel it reduces to an
exact lattice convolution evaluated by FFT.

Binary function format: raw little-endian float64 (complex stored as
re/im pairs), row-major over the lattice, next to a JSON sidecar
{"group", "lo", "hi", "n", "complex"}.
"""

import json

import numpy as np
from scipy.signal import fftconvolve

from .groups import GroupError, bch_multiply, dilate

__all__ = [
    "Grid",
    "SampledFunction",
    "convolve",
    "dilate_function",
    "lp_norm",
    "integrate",
    "involution",
    "moments",
    "left_translate",
    "delta_function",
    "save_function",
    "load_function",
]


class Grid:
    """Uniform lattice over the box [lo, hi).

    Nodes sit at lo + (k + offset) * h per axis; offset 0 places the group
    identity on the lattice for symmetric boxes with even n, offset 0.5
    gives midpoint-rule nodes (preferred for shell quadrature).
    """

    def __init__(self, alg, lo, hi, n, offset=0.0):
        self.alg = alg
        self.lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        self.n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        if not (len(self.lo) == len(self.hi) == len(self.n) == alg.dim):
            raise GroupError("grid spec does not match the group dimension")
        if np.any(self.hi <= self.lo) or np.any(self.n < 1):
            raise GroupError("grid box must satisfy lo < hi and n >= 1")
        self.offset = float(offset)
        self.h = (self.hi - self.lo) / self.n
        self.cell_volume = float(np.prod(self.h))
        self.size = int(np.prod(self.n))
        self.axes = [
            self.lo[i] + (np.arange(self.n[i]) + self.offset) * self.h[i]
            for i in range(alg.dim)
        ]
        self._points = None

    @property
    def shape(self):
        return tuple(int(m) for m in self.n)

    def points(self):
        if self._points is None:
            mesh = np.meshgrid(*self.axes, indexing="ij")
            self._points = np.stack([m.ravel() for m in mesh], axis=-1)
        return self._points

    @property
    def has_center(self):
        u = (0.0 - self.lo) / self.h - self.offset
        return bool(
            np.all(np.abs(u - np.round(u)) < 1e-9)
            and np.all(np.round(u) >= 0)
            and np.all(np.round(u) < self.n)
        )

    def center_index(self):
        if not self.has_center:
            raise GroupError("grid does not contain the group identity")
        u = np.round((0.0 - self.lo) / self.h - self.offset).astype(np.int64)
        return tuple(int(v) for v in u)

    def diameter(self):
        return float(np.max(self.hi - self.lo))

    def compatible(self, other):
        return (
            self.alg is other.alg
            and np.array_equal(self.n, other.n)
            and np.allclose(self.lo, other.lo)
            and np.allclose(self.hi, other.hi)
            and self.offset == other.offset
        )

    def interpolate(self, values, pts):
        """Multilinear interpolation with zero extension outside the box."""
        pts = np.asarray(pts, dtype=np.float64)
        flat = pts.reshape(-1, self.alg.dim)
        u = (flat - self.lo) / self.h - self.offset
        i0 = np.floor(u).astype(np.int64)
        frac = u - i0
        out = np.zeros(flat.shape[0], dtype=values.dtype)
        vals = values.reshape(self.shape)
        d = self.alg.dim
        for corner in range(1 << d):
            idx = np.empty_like(i0)
            w = np.ones(flat.shape[0])
            for ax in range(d):
                bit = (corner >> ax) & 1
                idx[:, ax] = i0[:, ax] + bit
                w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
            ok = np.all((idx >= 0) & (idx < self.n), axis=1)
            if not np.any(ok):
                continue
            sel = tuple(idx[ok].T)
            out[ok] += w[ok] * vals[sel]
        return out.reshape(pts.shape[:-1])

    def __repr__(self):
        return "Grid(%s, n=%s)" % (self.alg.name, list(self.shape))


class SampledFunction:
    """Function values on a grid, with an optional exact callable."""

    def __init__(self, grid, values, fn=None):
        values = np.asarray(values)
        if values.shape != grid.shape:
            if values.size == grid.size:
                values = values.reshape(grid.shape)
            else:
                raise GroupError("value array does not match the grid shape")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.fn = fn

    @classmethod
    def from_callable(cls, grid, fn, keep_fn=True):
        pts = grid.points()
        vals = np.asarray(fn(pts)).reshape(grid.shape)
        return cls(grid, vals, fn=fn if keep_fn else None)

    def evaluate(self, pts):
        if self.fn is not None:
            return np.asarray(self.fn(np.asarray(pts, dtype=np.float64)))
        return self.grid.interpolate(self.values, pts)

    def with_values(self, values, fn=None):
        return SampledFunction(self.grid, values, fn=fn)

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    def __repr__(self):
        return "SampledFunction(%r)" % (self.grid,)


def delta_function(grid):
    """Discrete convolution identity: spike 1/cell_volume at the identity."""
    vals = np.zeros(grid.shape)
    vals[grid.center_index()] = 1.0 / grid.cell_volume
    return SampledFunction(grid, vals)


# -- core operations ---------------------------------------------------------


def _difference_lattice_values(grid, g):
    """Values of g on the difference lattice {t*h : t in [-(n-1), n-1]}."""
    d = grid.alg.dim
    axes = [np.arange(-(grid.n[i] - 1), grid.n[i]) * grid.h[i] for i in range(d)]
    if isinstance(g, SampledFunction) and g.fn is not None:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return np.asarray(g.fn(pts)).reshape([len(a) for a in axes])
    if callable(g):
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return np.asarray(g(pts)).reshape([len(a) for a in axes])
    # sampled only: interpolate (exact when both grids share the lattice)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return g.grid.interpolate(g.values, pts).reshape([len(a) for a in axes])


def convolve(f, g, force_direct=False):
    """Group convolution (f * g)(x) = sum_y f(y) g(y^-1 x) cell_volume.

    On abelian groups the difference y^-1 x = x - y lies on the difference
    lattice, so the sum is an exact linear convolution (computed via FFT).
    Otherwise the products y^-1 x are generically off-lattice and g is
    evaluated by callable or multilinear interpolation.
    """
    grid = f.grid
    alg = grid.alg
    if isinstance(g, SampledFunction) and not grid.compatible(g.grid):
        raise GroupError("convolution operands live on different grids")
    if alg.is_abelian and not force_direct:
        garr = _difference_lattice_values(grid, g)
        full = fftconvolve(f.values, garr)
        sl = tuple(slice(m - 1, 2 * m - 1) for m in grid.shape)
        out = full[sl] * grid.cell_volume
        if not (f.is_complex or np.iscomplexobj(garr)):
            out = out.real
        return SampledFunction(grid, out)
    # nonabelian: direct quadrature
    from . import kernels

    pts = grid.points()
    fflat = f.values.ravel()
    if isinstance(g, SampledFunction) and g.fn is None:
        out = kernels.conv_sampled(
            np.ascontiguousarray(fflat, dtype=np.float64),
            np.ascontiguousarray(g.values.ravel(), dtype=np.float64),
            grid,
        )
        return SampledFunction(grid, out * grid.cell_volume)
    gfun = g.fn if isinstance(g, SampledFunction) else g
    out = np.empty(grid.size)
    for ix in range(grid.size):
        z = bch_multiply(alg, -pts, pts[ix])
        out[ix] = np.dot(fflat, np.asarray(gfun(z)))
    return SampledFunction(grid, out.reshape(grid.shape) * grid.cell_volume)


def dilate_function(f, t):
    """L1-normalized dilation f_t(x) = t^-Q f(delta_{1/t} x)."""
    if t <= 0:
        raise GroupError("dilation parameter must be positive")
    grid = f.grid
    alg = grid.alg
    pts = dilate(alg, 1.0 / t, grid.points())
    vals = f.evaluate(pts).reshape(grid.shape) * t ** (-alg.Q)
    fn = None
    if f.fn is not None:
        base = f.fn
        fn = lambda p: t ** (-alg.Q) * base(dilate(alg, 1.0 / t, p))
    return SampledFunction(grid, vals, fn=fn)


def lp_norm(f, p):
    if p <= 0:
        raise GroupError("p must be positive")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(np.max(a))
    return float(np.sum(a ** p) * f.grid.cell_volume) ** (1.0 / p)


def integrate(f):
    return complex(np.sum(f.values) * f.grid.cell_volume) if f.is_complex else float(
        np.sum(f.values) * f.grid.cell_volume
    )


def involution(f):
    """f^vee(x) = f(x^-1) = f(-x)."""
    grid = f.grid
    sym = np.allclose(grid.lo + grid.hi, 0.0)
    if sym and grid.offset == 0.5:
        vals = f.values[tuple(slice(None, None, -1) for _ in range(grid.alg.dim))]
        return SampledFunction(grid, vals.copy())
    vals = f.evaluate(-grid.points()).reshape(grid.shape)
    fn = None
    if f.fn is not None:
        base = f.fn
        fn = lambda p: base(-np.asarray(p))
    return SampledFunction(grid, vals, fn=fn)


def moments(f, M):
    """Map alpha -> integral of f(x) x^alpha for [alpha] <= M."""
    from .fields import standard_indices_up_to

    grid = f.grid
    pts = grid.points()
    fflat = f.values.ravel()
    out = {}
    for alpha in standard_indices_up_to(grid.alg, M):
        mono = np.ones(grid.size)
        for i, e in enumerate(alpha):
            if e:
                mono = mono * pts[:, i] ** e
        out[alpha] = np.sum(fflat * mono) * grid.cell_volume
    return out


def left_translate(f, a):
    """(L_a f)(x) = f(a^-1 x)."""
    grid = f.grid
    pts = bch_multiply(grid.alg, -np.asarray(a, dtype=np.float64), grid.points())
    vals = f.evaluate(pts).reshape(grid.shape)
    fn = None
    if f.fn is not None:
        base = f.fn
        av = np.asarray(a, dtype=np.float64)
        fn = lambda p: base(bch_multiply(grid.alg, -av, np.asarray(p)))
    return SampledFunction(grid, vals, fn=fn)


# -- binary IO ---------------------------------------------------------------


def save_function(f, path):
    vals = f.values
    cplx = bool(np.iscomplexobj(vals))
    if cplx:
        raw = np.empty(vals.shape + (2,))
        raw[..., 0] = vals.real
        raw[..., 1] = vals.imag
    else:
        raw = np.asarray(vals, dtype=np.float64)
    raw.astype("<f8").tofile(str(path) + ".bin")
    meta = {
        "group": f.grid.alg.to_dict(),
        "lo": list(map(float, f.grid.lo)),
        "hi": list(map(float, f.grid.hi)),
        "n": list(map(int, f.grid.n)),
        "offset": f.grid.offset,
        "complex": cplx,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)


def load_function(path, alg=None):
    from .groups import group_from_dict

    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    if alg is None:
        alg = group_from_dict(meta["group"])
    grid = Grid(alg, meta["lo"], meta["hi"], meta["n"], offset=meta.get("offset", 0.0))
    raw = np.fromfile(str(path) + ".bin", dtype="<f8")
    if meta["complex"]:
        raw = raw.reshape(grid.shape + (2,))
        vals = raw[..., 0] + 1j * raw[..., 1]
    else:
        vals = raw.reshape(grid.shape)
    return SampledFunction(grid, vals)
