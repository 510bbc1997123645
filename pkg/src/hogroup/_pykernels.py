"""Pure-numpy implementations of the pairwise lattice kernels.

These mirror the compiled extension `_ckernels` exactly (same signatures,
same semantics) and serve as the import-time fallback.  All routines scan
over output points and vectorize the inner loop over the full lattice, so
they are O(M^2) with O(M) temporaries.

Shared argument conventions:
  lo, h        box origin and spacings, float64[d]
  n            points per axis, int64[d]
  offset       lattice offset in cells (0 or 0.5)
  tk, tc, tax, tay   flattened group-law monomial table (nonlinear part)
  qexp, two_n  quasi-norm exponents 2N/v_i and the even integer 2N
"""

import numpy as np

IS_COMPILED = False


def _lattice(lo, h, n, offset):
    axes = [lo[i] + (np.arange(n[i]) + offset) * h[i] for i in range(len(n))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _law(tk, tc, tax, tay, a, b):
    """Group law z = a * b for batched a, b of shape (M, d)."""
    z = a + b
    for k, c, ax, ay in zip(tk, tc, tax, tay):
        term = np.full(a.shape[0], c)
        for i in np.nonzero(ax)[0]:
            term = term * a[:, i] ** int(ax[i])
        for i in np.nonzero(ay)[0]:
            term = term * b[:, i] ** int(ay[i])
        z[:, k] += term
    return z


def _qnorm(qexp, two_n, z):
    return np.sum(np.abs(z) ** qexp, axis=-1) ** (1.0 / two_n)


def _interp(vals, lo, h, n, offset, pts):
    d = len(n)
    u = (pts - lo) / h - offset
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    out = np.zeros(pts.shape[0])
    shape = tuple(int(m) for m in n)
    v = vals.reshape(shape)
    for corner in range(1 << d):
        idx = np.empty_like(i0)
        w = np.ones(pts.shape[0])
        for ax in range(d):
            bit = (corner >> ax) & 1
            idx[:, ax] = i0[:, ax] + bit
            w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
        ok = np.all((idx >= 0) & (idx < n), axis=1)
        if np.any(ok):
            out[ok] += w[ok] * v[tuple(idx[ok].T)]
    return out


def conv_sampled(fvals, gvals, lo, h, n, offset, tk, tc, tax, tay):
    """out[ix] = sum_iy f[iy] * g(y^-1 x); caller multiplies cell volume."""
    pts = _lattice(lo, h, n, offset)
    M = pts.shape[0]
    out = np.empty(M)
    neg = -pts
    for ix in range(M):
        z = _law(tk, tc, tax, tay, neg, np.broadcast_to(pts[ix], pts.shape))
        out[ix] = np.dot(fvals, _interp(gvals, lo, h, n, offset, z))
    return out


def peetre_sup_nd(absF, lo, h, n, offset, tk, tc, tax, tay, qexp, two_n, t, a):
    """out[ix] = sup_iy absF[iy] / (1 + |y^-1 x| / t)^a."""
    pts = _lattice(lo, h, n, offset)
    M = pts.shape[0]
    out = np.empty(M)
    neg = -pts
    for ix in range(M):
        z = _law(tk, tc, tax, tay, neg, np.broadcast_to(pts[ix], pts.shape))
        w = (1.0 + _qnorm(qexp, two_n, z) / t) ** (-a)
        out[ix] = np.max(absF * w)
    return out


def peetre_sup_1d(absF, h, t, a):
    """1-D Euclidean specialization using a distance-ring weight table."""
    M = absF.shape[0]
    w = (1.0 + np.arange(M) * h / t) ** (-a)
    out = np.empty(M)
    idx = np.arange(M)
    for ix in range(M):
        out[ix] = np.max(absF * w[np.abs(idx - ix)])
    return out


def hl_max_nd(avals, lo, h, n, offset, tk, tc, tax, tay, qexp, two_n, radii):
    """out[ix] = max over radii r of mean of avals over {y : |y^-1 x| < r}.

    Empty balls are skipped; the mean uses the lattice counting measure,
    i.e. the ball measure clipped to the box.
    """
    pts = _lattice(lo, h, n, offset)
    M = pts.shape[0]
    R = len(radii)
    out = np.empty(M)
    neg = -pts
    for ix in range(M):
        z = _law(tk, tc, tax, tay, neg, np.broadcast_to(pts[ix], pts.shape))
        dist = _qnorm(qexp, two_n, z)
        bins = np.searchsorted(radii, dist, side="right")
        cnt = np.bincount(bins, minlength=R + 1)[:R]
        sums = np.bincount(bins, weights=avals, minlength=R + 1)[:R]
        ccnt = np.cumsum(cnt)
        csum = np.cumsum(sums)
        ok = ccnt > 0
        out[ix] = np.max(csum[ok] / ccnt[ok]) if np.any(ok) else 0.0
    return out


def pairwise_qnorm(lo, h, n, offset, tk, tc, tax, tay, qexp, two_n, centers):
    """dist[ic, ix] = |centers_ic^-1 x_ix| for all lattice points x."""
    pts = _lattice(lo, h, n, offset)
    out = np.empty((centers.shape[0], pts.shape[0]))
    for ic in range(centers.shape[0]):
        z = _law(
            tk,
            tc,
            tax,
            tay,
            np.broadcast_to(-centers[ic], pts.shape).copy(),
            pts,
        )
        out[ic] = _qnorm(qexp, two_n, z)
    return out
