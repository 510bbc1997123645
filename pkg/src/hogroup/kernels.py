"""Backend dispatch for the pairwise lattice kernels.

The compiled extension `_ckernels` is used when importable; otherwise the
pure-numpy `_pykernels` fallback is selected.  Set HOGROUP_PURE=1 to force
the fallback (used by the benchmark and the cross-checking tests).
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("HOGROUP_PURE", "") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built; numpy fallback
        _impl = _pykernels

IS_COMPILED = bool(getattr(_impl, "IS_COMPILED", False))
BACKEND = "compiled" if IS_COMPILED else "numpy"


def _grid_args(grid):
    if grid.alg.dim > 8:
        raise ValueError("kernels support dimension <= 8")
    return (
        np.ascontiguousarray(grid.lo),
        np.ascontiguousarray(grid.h),
        np.ascontiguousarray(grid.n),
        float(grid.offset),
    )


def _law_args(alg):
    t = alg.law_terms
    return (
        np.ascontiguousarray(t["k"], dtype=np.int32),
        np.ascontiguousarray(t["c"], dtype=np.float64),
        np.ascontiguousarray(t["ax"], dtype=np.int8),
        np.ascontiguousarray(t["ay"], dtype=np.int8),
    )


def _qn_args(qnorm):
    return np.ascontiguousarray(qnorm.exponents), float(qnorm.two_n)


def conv_sampled(fflat, gflat, grid):
    return _impl.conv_sampled(
        np.ascontiguousarray(fflat, dtype=np.float64),
        np.ascontiguousarray(gflat, dtype=np.float64),
        *_grid_args(grid),
        *_law_args(grid.alg),
    )


def peetre_sup(absF, grid, qnorm, t, a):
    absF = np.ascontiguousarray(absF, dtype=np.float64).ravel()
    if grid.alg.dim == 1 and grid.alg.is_abelian:
        return _impl.peetre_sup_1d(absF, float(grid.h[0]), float(t), float(a))
    return _impl.peetre_sup_nd(
        absF,
        *_grid_args(grid),
        *_law_args(grid.alg),
        *_qn_args(qnorm),
        float(t),
        float(a),
    )


def hl_max(avals, grid, qnorm, radii):
    return _impl.hl_max_nd(
        np.ascontiguousarray(avals, dtype=np.float64).ravel(),
        *_grid_args(grid),
        *_law_args(grid.alg),
        *_qn_args(qnorm),
        np.ascontiguousarray(np.sort(np.asarray(radii, dtype=np.float64))),
    )


def pairwise_qnorm(grid, qnorm, centers):
    return _impl.pairwise_qnorm(
        *_grid_args(grid),
        *_law_args(grid.alg),
        *_qn_args(qnorm),
        np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64),
    )
