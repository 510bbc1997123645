"""Discretized homogeneous operators and Calderon filter construction.

Two operator realizations are provided.  On abelian groups a Fourier
symbol path evaluates spectral multipliers exactly on the FFT lattice.
On general groups, operators are assembled as symmetric matrices on the
grid: the order-one singular-integral operator driven by a smooth
quasi-norm, and the sub-Laplacian built from second differences along the
first-stratum flows.  Functional calculus uses a dense eigendecomposition
up to a size cap and a matrix-free Lanczos process beyond it.

Filters come from a smooth compactly supported bump theta on [1/2, 2],
normalized so that either sum_j m(2^-j lambda)^2 = 1 (discrete tag) or
int_0^inf m(t lambda)^2 dt/t = 1 (continuous tag).
"""

import math
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .grid import SampledFunction, delta_function
from .groups import GroupError, bch_multiply

__all__ = [
    "make_theta",
    "make_discrete_multiplier",
    "make_continuous_multiplier",
    "EuclideanSymbolOp",
    "MatrixOp",
    "assemble_P",
    "assemble_sublaplacian",
    "apply_multiplier",
    "filter_kernel",
    "heat_kernel",
    "CalderonFilter",
    "resolvable_band",
    "lanczos",
    "LanczosCalculus",
]

DENSE_EIG_CAP = 4096  # largest grid for dense eigendecomposition


class ScaleWarning(UserWarning):
    pass


def resolvable_band(grid):
    """Scales the grid can represent: [4 max h_i, diameter / 4]."""
    return 4.0 * float(np.max(grid.h)), grid.diameter() / 4.0


# -- multipliers -------------------------------------------------------------


def _smoothstep(u):
    u = np.asarray(u, dtype=np.float64)
    e1 = np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    e2 = np.where(1 - u > 0, np.exp(-1.0 / np.maximum(1 - u, 1e-300)), 0.0)
    return e1 / (e1 + e2)


def make_theta(support=(0.5, 2.0), rise=0.1, fall=0.1):
    """C-infinity plateau bump on `support` with the given edge widths."""
    lo, hi = support

    def theta(lam):
        lam = np.asarray(lam, dtype=np.float64)
        return _smoothstep((lam - lo) / rise) * _smoothstep((hi - lam) / fall)

    theta.support = (lo, hi)
    return theta


class Multiplier:
    """Normalized spectral multiplier with its admissibility tag."""

    def __init__(self, fn, tag, support):
        self._fn = fn
        self.tag = tag
        self.support = support

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        out = np.zeros_like(lam)
        pos = lam > 0
        if np.any(pos):
            out[pos] = self._fn(lam[pos])
        return out


def _check_tauberian(theta):
    lam = np.linspace(3.0 / 5.0, 5.0 / 3.0, 257)
    vals = theta(lam)
    if np.min(vals) <= 0:
        raise GroupError("bump must be strictly positive on [3/5, 5/3]")


def make_discrete_multiplier(theta):
    """m = theta / sqrt(sum_j theta(2^-j .)^2); exact dyadic partition."""
    _check_tauberian(theta)

    def m(lam):
        lam = np.asarray(lam, dtype=np.float64)
        k0 = np.floor(np.log2(lam)).astype(np.int64)
        denom = np.zeros_like(lam)
        for jj in range(-2, 3):
            denom += theta(lam * 2.0 ** (-(k0 + jj).astype(np.float64))) ** 2
        return theta(lam) / np.sqrt(denom)

    return Multiplier(m, "discrete", theta.support)


def make_continuous_multiplier(theta, n_quad=1 << 14):
    """m = theta / sqrt(int theta(u)^2 du/u); scale-invariant normalization."""
    _check_tauberian(theta)
    lo, hi = theta.support
    u = np.linspace(np.log(lo) - 0.5, np.log(hi) + 0.5, n_quad)
    integral = np.trapezoid(theta(np.exp(u)) ** 2, u)
    scale = 1.0 / math.sqrt(integral)

    def m(lam):
        return theta(lam) * scale

    return Multiplier(m, "continuous", theta.support)


def check_discrete_partition(m, lam_values):
    """Max deviation of sum_j m(2^-j lam)^2 from 1."""
    lam = np.asarray(lam_values, dtype=np.float64)
    k0 = np.floor(np.log2(lam)).astype(np.int64)
    total = np.zeros_like(lam)
    for jj in range(-3, 4):
        total += m(lam * 2.0 ** (-(k0 + jj).astype(np.float64))) ** 2
    return float(np.max(np.abs(total - 1.0)))


def check_continuous_partition(m, lam_values, nodes_per_octave=64):
    """Max deviation of int m(t lam)^2 dt/t from 1 (log quadrature)."""
    lo, hi = m.support
    lam = np.asarray(lam_values, dtype=np.float64)
    worst = 0.0
    du = np.log(2.0) / nodes_per_octave
    for l in lam:
        u = np.arange(np.log(lo / l) - 0.5, np.log(hi / l) + 0.5, du)
        val = np.trapezoid(m(np.exp(u) * l) ** 2, u)
        worst = max(worst, abs(val - 1.0))
    return worst


# -- operators ---------------------------------------------------------------


class EuclideanSymbolOp:
    """Fourier-multiplier operator on an abelian group.

    `symbol` maps frequency vectors to a nonnegative value homogeneous of
    degree one under the dual dilations; the default is the Euclidean
    norm (the symbol of the half-Laplacian).
    """

    kind = "symbol"
    nu = 1

    def __init__(self, grid, symbol=None):
        if not grid.alg.is_abelian:
            raise GroupError("symbol path requires an abelian group")
        self.grid = grid
        freqs = [
            2.0 * np.pi * np.fft.fftfreq(int(grid.n[i]), d=grid.h[i])
            for i in range(grid.alg.dim)
        ]
        mesh = np.meshgrid(*freqs, indexing="ij")
        xi = np.stack(mesh, axis=-1)
        if symbol is None:
            self.symbol_values = np.sqrt(np.sum(xi ** 2, axis=-1))
        else:
            self.symbol_values = np.asarray(symbol(xi))
        self._freq_mesh = mesh

    def lambda_range(self):
        pos = self.symbol_values[self.symbol_values > 0]
        return float(np.min(pos)), float(np.max(self.symbol_values))

    def apply_scaled(self, m, t, values):
        M = m(t * self.symbol_values)
        out = np.fft.ifftn(M * np.fft.fftn(values))
        return out if np.iscomplexobj(values) else out.real

    def kernel_of(self, m, t=1.0):
        """Grid samples of the convolution kernel of m(t * op)."""
        grid = self.grid
        M = m(t * self.symbol_values).astype(np.complex128)
        for i, ax_mesh in enumerate(self._freq_mesh):
            M = M * np.exp(1j * grid.lo[i] * ax_mesh)
        vals = np.fft.ifftn(M).real / grid.cell_volume
        return vals


def anisotropic_symbol(alg, two_n=None):
    """Degree-one homogeneous symbol for anisotropic abelian dilations."""
    from .groups import _lcm

    if two_n is None:
        two_n = 2 * _lcm(alg.weights)
    exps = np.asarray([two_n / v for v in alg.weights])

    def symbol(xi):
        return np.sum(np.abs(xi) ** exps, axis=-1) ** (1.0 / two_n)

    return symbol


class MatrixOp:
    """Symmetric operator matrix on the grid (dense or sparse).

    nu is the homogeneity degree in group units: multipliers are always
    evaluated at t * lambda^(1/nu) so callers pass group-scale t.
    """

    kind = "matrix"

    def __init__(self, grid, A, nu, name="", dense_cap=DENSE_EIG_CAP):
        self.grid = grid
        self.nu = nu
        self.name = name
        self.dense_cap = dense_cap
        if sp.issparse(A):
            asym = abs(A - A.T).max() / max(abs(A).max(), 1e-300)
        else:
            asym = float(
                np.max(np.abs(A - A.T)) / max(np.max(np.abs(A)), 1e-300)
            )
        self.asymmetry = float(asym)
        if self.asymmetry > 1e-10:
            A = (A + A.T) / 2.0
        self.A = A
        self.size = grid.size
        self._decomp = None

    def matvec(self, v):
        return self.A @ v

    def decompose(self):
        """Dense spectral decomposition with near-kernel clamping."""
        if self._decomp is None:
            if self.size > self.dense_cap:
                raise GroupError(
                    "grid size %d exceeds the dense eigendecomposition cap %d;"
                    " use the Lanczos path" % (self.size, self.dense_cap)
                )
            A = self.A.toarray() if sp.issparse(self.A) else np.asarray(self.A)
            lam, V = scipy.linalg.eigh(A)
            lam_max = float(np.max(np.abs(lam)))
            neg = lam < -1e-8 * lam_max
            if np.any(neg):
                warnings.warn(
                    "matrix operator has %d significantly negative modes"
                    % int(np.sum(neg)),
                    ScaleWarning,
                )
            lam = np.maximum(lam, 0.0)
            recon = np.linalg.norm((V * lam) @ V.T - A) / max(
                np.linalg.norm(A), 1e-300
            )
            self._decomp = (lam, V, float(recon))
        return self._decomp

    def lambda_range(self):
        if self.size <= self.dense_cap:
            lam, _, _ = self.decompose()
            pos = lam[lam > 1e-10 * max(lam[-1], 1e-300)]
            return float(pos[0]) if pos.size else 0.0, float(lam[-1])
        est = _power_lambda_max(self.A)
        return 0.0, est

    def apply_scaled(self, m, t, values):
        lam, V, _ = self.decompose()
        glam = m(t * np.power(lam, 1.0 / self.nu, where=lam > 0, out=np.zeros_like(lam)))
        flat = values.ravel()
        return (V @ (glam * (V.T @ flat))).reshape(values.shape)

    def apply_fn(self, g, values):
        """g acts directly on operator eigenvalues."""
        lam, V, _ = self.decompose()
        flat = values.ravel()
        return (V @ (g(lam) * (V.T @ flat))).reshape(values.shape)


def _power_lambda_max(A, iters=60, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = A @ v
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


# -- operator assemblies -----------------------------------------------------


def homogeneous_normalization(dim):
    """Symbol constant of the Euclidean-norm singular integral on R^d.

    The kernel |x|^-(d+1) quadratic form has Fourier symbol C |xi| with
    C = pi^((d+1)/2) / Gamma((d+1)/2); dividing by C matches the
    half-Laplacian symbol |xi|.
    """
    return math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0)


def assemble_P(grid, qnorm, eps_cut=None, normalize=False, chunk=256):
    """Order-one singular-integral operator from a smooth quasi-norm.

    (P f)(x) ~ sum over grid points y with |y^-1 x| >= eps_cut of
    (f(x) - f(y)) / |y^-1 x|^(Q+1) * cell_volume.  The resulting matrix is
    symmetric, positive semidefinite and annihilates constants row-wise.
    """
    alg = grid.alg
    if eps_cut is None:
        eps_cut = 2.0 * float(np.max(grid.h))
    if eps_cut < 2.0 * float(np.max(grid.h)) - 1e-12:
        raise GroupError("eps_cut below grid resolution")
    pts = grid.points()
    M = grid.size
    W = np.zeros((M, M))
    for start in range(0, M, chunk):
        stop = min(start + chunk, M)
        block = pts[start:stop]
        z = bch_multiply(alg, -pts[None, :, :], block[:, None, :])
        dist = qnorm(z.reshape(-1, alg.dim)).reshape(stop - start, M)
        w = np.where(dist >= eps_cut, dist, np.inf) ** (-(alg.Q + 1.0))
        W[start:stop] = w
    W *= grid.cell_volume
    A = np.diag(W.sum(axis=1)) - W
    A = (A + A.T) / 2.0
    if normalize:
        if not (alg.is_abelian and len(set(alg.weights)) == 1 and qnorm.two_n == 2):
            raise GroupError(
                "symbol normalization is only defined for the isotropic "
                "abelian case with the Euclidean norm"
            )
        A /= homogeneous_normalization(alg.dim)
    return MatrixOp(grid, A, nu=1, name="P")


def _flow_shift_matrix(grid, j, step):
    """Sparse matrix for f -> f(x * (step e_j)), multilinear interpolation."""
    alg = grid.alg
    pts = grid.points()
    e = np.zeros(alg.dim)
    e[j] = step
    z = bch_multiply(alg, pts, e)
    u = (z - grid.lo) / grid.h - grid.offset
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    d = alg.dim
    M = grid.size
    rows, cols, vals = [], [], []
    strides = np.cumprod(np.concatenate(([1], grid.n[::-1][:-1])))[::-1]
    for corner in range(1 << d):
        idx = i0.copy()
        w = np.ones(M)
        for ax in range(d):
            bit = (corner >> ax) & 1
            idx[:, ax] = i0[:, ax] + bit
            w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
        ok = np.all((idx >= 0) & (idx < grid.n), axis=1) & (w != 0)
        if not np.any(ok):
            continue
        flat = (idx[ok] * strides).sum(axis=1)
        rows.append(np.nonzero(ok)[0])
        cols.append(flat)
        vals.append(w[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(M, M))


def first_stratum(alg):
    gens = [i for i, v in enumerate(alg.weights) if v == 1]
    if not gens:
        raise GroupError("group is not stratified: no weight-one layer")
    # check the first layer generates: iterated brackets span everything
    span = np.zeros((alg.dim, len(gens)))
    for c, i in enumerate(gens):
        span[i, c] = 1.0
    total = span
    for _ in range(alg.dim):
        new = []
        for i in gens:
            for col in total.T:
                v = np.einsum("jk,j->k", alg.structure[i], col)
                if np.any(np.abs(v) > 1e-14):
                    new.append(v)
        if new:
            total = np.concatenate([total, np.asarray(new).T], axis=1)
    if np.linalg.matrix_rank(total, tol=1e-10) < alg.dim:
        raise GroupError("group is not stratified: first layer does not generate")
    return gens


def assemble_sublaplacian(grid, form="difference", dense=None):
    """Negative sub-Laplacian -sum_j Z_j^2 along first-stratum flows.

    form="difference": second differences f(x (h e_j)) - 2 f + f(x (-h e_j)),
    symmetrized.  form="gram": sum_j D_j^T D_j with forward flow differences
    (exactly positive semidefinite).  Returns a MatrixOp of degree 2.
    """
    alg = grid.alg
    gens = first_stratum(alg)
    M = grid.size
    A = sp.csr_matrix((M, M))
    eye = sp.identity(M, format="csr")
    for j in gens:
        hj = float(grid.h[j])
        Pp = _flow_shift_matrix(grid, j, hj)
        Pm = _flow_shift_matrix(grid, j, -hj)
        if form == "difference":
            A = A - (Pp - 2.0 * eye + Pm) / hj ** 2
        elif form == "gram":
            D = (Pp - eye) / hj
            A = A + D.T @ D
        else:
            raise GroupError("unknown sub-Laplacian form %r" % form)
    if dense is None:
        dense = M <= DENSE_EIG_CAP
    if dense:
        A = A.toarray()
    return MatrixOp(grid, A, nu=2, name="sublaplacian")


# -- functional calculus entry points ---------------------------------------


def _warn_scale(grid, t):
    t_min, t_max = resolvable_band(grid)
    if not (t_min <= t <= t_max):
        warnings.warn(
            "scale t=%.3g outside the resolvable band [%.3g, %.3g]"
            % (t, t_min, t_max),
            ScaleWarning,
            stacklevel=3,
        )
        return True
    return False


def apply_multiplier(op, m, t, f, warn=True):
    """m(t * op^(1/nu)) f, i.e. convolution with the t-dilated kernel."""
    if warn:
        _warn_scale(op.grid, t)
    vals = op.apply_scaled(m, t, f.values)
    return SampledFunction(f.grid, vals)


def filter_kernel(op, m, t=1.0):
    """Convolution kernel of m(t * op^(1/nu)) as a SampledFunction."""
    if isinstance(op, EuclideanSymbolOp):
        return SampledFunction(op.grid, op.kernel_of(m, t))
    return apply_multiplier(op, m, t, delta_function(op.grid), warn=False)


def heat_kernel(op, t, normalize=False):
    """Kernel of exp(-t op) (t in operator units)."""
    if isinstance(op, EuclideanSymbolOp):
        vals = op.kernel_of(lambda lam: np.exp(-t * lam ** op.nu), 1.0)
    else:
        lam, V, _ = op.decompose()
        center = delta_function(op.grid).values.ravel()
        vals = (V @ (np.exp(-t * lam) * (V.T @ center))).reshape(op.grid.shape)
    f = SampledFunction(op.grid, vals)
    if normalize:
        from .grid import integrate

        total = integrate(f)
        f = SampledFunction(op.grid, vals / total)
    return f


# -- Lanczos path ------------------------------------------------------------


def lanczos(matvec, b, k, reorth=True):
    """Symmetric Lanczos with optional full reorthogonalization."""
    b = np.asarray(b, dtype=np.float64).ravel()
    nb = float(np.linalg.norm(b))
    if nb == 0:
        raise GroupError("Lanczos needs a nonzero start vector")
    V = np.zeros((k, b.size))
    alpha = np.zeros(k)
    beta = np.zeros(k)
    V[0] = b / nb
    prev = np.zeros_like(b)
    bprev = 0.0
    m = k
    for i in range(k):
        w = matvec(V[i]) - bprev * prev
        alpha[i] = float(np.dot(w, V[i]))
        w -= alpha[i] * V[i]
        if reorth:
            w -= V[: i + 1].T @ (V[: i + 1] @ w)
        bi = float(np.linalg.norm(w))
        if i + 1 < k:
            if bi < 1e-13 * nb:
                m = i + 1
                break
            beta[i] = bi
            prev = V[i]
            bprev = bi
            V[i + 1] = w / bi
    return alpha[:m], beta[: m - 1], V[:m], nb


class LanczosCalculus:
    """Reusable Krylov space for g(A) b with many functions g."""

    def __init__(self, op, b, k=150, reorth=True):
        self.op = op
        alpha, beta, V, nb = lanczos(op.matvec, b, k, reorth=reorth)
        theta, S = scipy.linalg.eigh_tridiagonal(alpha, beta)
        self.theta = np.maximum(theta, 0.0)
        self.raw_theta = theta
        self.S = S
        self.V = V
        self.nb = nb

    def apply(self, g):
        """g applied to operator eigenvalues (operator units)."""
        coeff = self.S @ (g(self.theta) * self.S[0])
        return self.nb * (self.V.T @ coeff)

    def apply_scaled(self, m, t):
        nu = self.op.nu
        lam = np.power(self.theta, 1.0 / nu)
        coeff = self.S @ (m(t * lam) * self.S[0])
        return self.nb * (self.V.T @ coeff)


# -- Calderon filters --------------------------------------------------------


class CalderonFilter:
    """A spectral multiplier paired with an operator realization.

    apply(f, t) computes f * phi_t = m(t op^(1/nu)) f.  The kernel at unit
    scale is available when the grid contains the identity.
    """

    def __init__(self, op, m, moment_order=4, name=""):
        self.op = op
        self.m = m
        self.tag = m.tag
        self.moment_order = moment_order
        self.name = name or ("filter-" + m.tag)
        self._kernel = None

    @property
    def grid(self):
        return self.op.grid

    def apply(self, f, t, warn=True):
        return apply_multiplier(self.op, self.m, t, f, warn=warn)

    def kernel(self, t=1.0):
        if t == 1.0:
            if self._kernel is None:
                self._kernel = filter_kernel(self.op, self.m, 1.0)
            return self._kernel
        return filter_kernel(self.op, self.m, t)

    def admissibility_report(self, n_lambda=10_000):
        if isinstance(self.op, EuclideanSymbolOp):
            lo, hi = self.op.lambda_range()
        else:
            lo, hi = self.op.lambda_range()
            lo = max(lo, 1e-6)
        lam = np.logspace(np.log10(max(lo, 1e-8)), np.log10(hi), n_lambda)
        if self.tag == "discrete":
            dev = check_discrete_partition(self.m, lam)
        else:
            dev = check_continuous_partition(self.m, lam[:: max(1, n_lambda // 64)])
        from .grid import lp_norm, moments

        ker = self.kernel()
        mom = moments(ker, self.moment_order)
        l1 = lp_norm(ker, 1)
        worst_moment = max(abs(v) for v in mom.values()) / max(l1, 1e-300)
        return {
            "tag": self.tag,
            "partition_deviation": float(dev),
            "max_relative_moment": float(worst_moment),
            "kernel_l1": float(l1),
        }
