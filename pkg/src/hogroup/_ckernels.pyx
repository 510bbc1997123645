# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise lattice kernels (hot loops of the toolkit).

Mirrors `_pykernels` function-for-function; see that module for the
argument conventions.  The group law is evaluated per pair from the
flattened monomial table, so any bundled group works without
regeneration of the extension.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, pow
from libc.stdlib cimport free, malloc

IS_COMPILED = True

cnp.import_array()


cdef inline void _point(double* out, const double* lo, const double* h,
                        const long* n, double offset, long flat, int d) noexcept nogil:
    cdef int ax
    cdef long idx, rest = flat
    for ax in range(d - 1, -1, -1):
        idx = rest % n[ax]
        rest //= n[ax]
        out[ax] = lo[ax] + (idx + offset) * h[ax]


cdef inline void _law(double* z, const double* a, const double* b, int d,
                      int nt, const int* tk, const double* tc,
                      const signed char* tax, const signed char* tay) noexcept nogil:
    cdef int i, t, e
    cdef double term
    for i in range(d):
        z[i] = a[i] + b[i]
    for t in range(nt):
        term = tc[t]
        for i in range(d):
            for e in range(tax[t * d + i]):
                term *= a[i]
            for e in range(tay[t * d + i]):
                term *= b[i]
        z[tk[t]] += term


cdef inline double _qnorm(const double* z, const double* qexp, double two_n,
                          int d) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(d):
        s += pow(fabs(z[i]), qexp[i])
    return pow(s, 1.0 / two_n)


cdef inline double _interp(const double* vals, const double* lo, const double* h,
                           const long* n, double offset, const double* z,
                           int d) noexcept nogil:
    cdef double u, w, acc = 0.0
    cdef long i0[8]
    cdef double frac[8]
    cdef int ax, corner, bit
    cdef long idx, stride, flat
    cdef bint ok
    for ax in range(d):
        u = (z[ax] - lo[ax]) / h[ax] - offset
        i0[ax] = <long>floor(u)
        frac[ax] = u - i0[ax]
    for corner in range(1 << d):
        w = 1.0
        flat = 0
        stride = 1
        ok = True
        for ax in range(d - 1, -1, -1):
            bit = (corner >> ax) & 1
            idx = i0[ax] + bit
            if idx < 0 or idx >= n[ax]:
                ok = False
                break
            w *= frac[ax] if bit else 1.0 - frac[ax]
            flat += idx * stride
            stride *= n[ax]
        if ok:
            acc += w * vals[flat]
    return acc


def conv_sampled(const double[::1] fvals, const double[::1] gvals,
                 const double[::1] lo, const double[::1] h, const long[::1] n, double offset,
                 const int[::1] tk, const double[::1] tc,
                 const signed char[:, ::1] tax, const signed char[:, ::1] tay):
    cdef int d = lo.shape[0]
    cdef long M = fvals.shape[0]
    cdef int nt = tk.shape[0]
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    cdef double x[8]
    cdef double y[8]
    cdef double negy[8]
    cdef double z[8]
    cdef long ix, iy
    cdef int i
    cdef double acc
    cdef const signed char* taxp = NULL
    cdef const signed char* tayp = NULL
    cdef const int* tkp = NULL
    cdef const double* tcp = NULL
    if nt > 0:
        taxp = &tax[0, 0]
        tayp = &tay[0, 0]
        tkp = &tk[0]
        tcp = &tc[0]
    with nogil:
        for ix in range(M):
            _point(x, &lo[0], &h[0], &n[0], offset, ix, d)
            acc = 0.0
            for iy in range(M):
                if fvals[iy] == 0.0:
                    continue
                _point(y, &lo[0], &h[0], &n[0], offset, iy, d)
                for i in range(d):
                    negy[i] = -y[i]
                _law(z, negy, x, d, nt, tkp, tcp, taxp, tayp)
                acc += fvals[iy] * _interp(&gvals[0], &lo[0], &h[0], &n[0],
                                           offset, z, d)
            out[ix] = acc
    return out_arr


def peetre_sup_nd(const double[::1] absF,
                  const double[::1] lo, const double[::1] h, const long[::1] n, double offset,
                  const int[::1] tk, const double[::1] tc,
                  const signed char[:, ::1] tax, const signed char[:, ::1] tay,
                  const double[::1] qexp, double two_n, double t, double a):
    cdef int d = lo.shape[0]
    cdef long M = absF.shape[0]
    cdef int nt = tk.shape[0]
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    cdef double x[8]
    cdef double y[8]
    cdef double negy[8]
    cdef double z[8]
    cdef long ix, iy
    cdef int i
    cdef double best, cand
    cdef const signed char* taxp = NULL
    cdef const signed char* tayp = NULL
    cdef const int* tkp = NULL
    cdef const double* tcp = NULL
    if nt > 0:
        taxp = &tax[0, 0]
        tayp = &tay[0, 0]
        tkp = &tk[0]
        tcp = &tc[0]
    with nogil:
        for ix in range(M):
            _point(x, &lo[0], &h[0], &n[0], offset, ix, d)
            best = 0.0
            for iy in range(M):
                if absF[iy] <= best:
                    continue
                _point(y, &lo[0], &h[0], &n[0], offset, iy, d)
                for i in range(d):
                    negy[i] = -y[i]
                _law(z, negy, x, d, nt, tkp, tcp, taxp, tayp)
                cand = absF[iy] * pow(1.0 + _qnorm(z, &qexp[0], two_n, d) / t, -a)
                if cand > best:
                    best = cand
            out[ix] = best
    return out_arr


def peetre_sup_1d(const double[::1] absF, double h, double t, double a):
    cdef long M = absF.shape[0]
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    w_arr = (1.0 + np.arange(M) * h / t) ** (-a)
    cdef const double[::1] w = w_arr
    cdef long ix, iy, dd
    cdef double best, cand
    with nogil:
        for ix in range(M):
            best = 0.0
            for iy in range(M):
                if absF[iy] <= best:
                    continue
                dd = ix - iy if ix >= iy else iy - ix
                cand = absF[iy] * w[dd]
                if cand > best:
                    best = cand
            out[ix] = best
    return out_arr


def hl_max_nd(const double[::1] avals,
              const double[::1] lo, const double[::1] h, const long[::1] n, double offset,
              const int[::1] tk, const double[::1] tc,
              const signed char[:, ::1] tax, const signed char[:, ::1] tay,
              const double[::1] qexp, double two_n, const double[::1] radii):
    cdef int d = lo.shape[0]
    cdef long M = avals.shape[0]
    cdef int nt = tk.shape[0]
    cdef int R = radii.shape[0]
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    cdef double x[8]
    cdef double y[8]
    cdef double negy[8]
    cdef double z[8]
    cdef long ix, iy
    cdef int i, b, lo_b, hi_b, mid
    cdef double dist, best, csum
    cdef long ccnt
    cdef double* sums
    cdef long* cnts
    cdef const signed char* taxp = NULL
    cdef const signed char* tayp = NULL
    cdef const int* tkp = NULL
    cdef const double* tcp = NULL
    if nt > 0:
        taxp = &tax[0, 0]
        tayp = &tay[0, 0]
        tkp = &tk[0]
        tcp = &tc[0]
    sums = <double*>malloc(R * sizeof(double))
    cnts = <long*>malloc(R * sizeof(long))
    if sums == NULL or cnts == NULL:
        free(sums)
        free(cnts)
        raise MemoryError
    with nogil:
        for ix in range(M):
            for b in range(R):
                sums[b] = 0.0
                cnts[b] = 0
            _point(x, &lo[0], &h[0], &n[0], offset, ix, d)
            for iy in range(M):
                _point(y, &lo[0], &h[0], &n[0], offset, iy, d)
                for i in range(d):
                    negy[i] = -y[i]
                _law(z, negy, x, d, nt, tkp, tcp, taxp, tayp)
                dist = _qnorm(z, &qexp[0], two_n, d)
                # first radius bin with radii[b] > dist (ball openness)
                lo_b = 0
                hi_b = R
                while lo_b < hi_b:
                    mid = (lo_b + hi_b) // 2
                    if radii[mid] > dist:
                        hi_b = mid
                    else:
                        lo_b = mid + 1
                if lo_b < R:
                    sums[lo_b] += avals[iy]
                    cnts[lo_b] += 1
            best = 0.0
            csum = 0.0
            ccnt = 0
            for b in range(R):
                csum += sums[b]
                ccnt += cnts[b]
                if ccnt > 0 and csum / ccnt > best:
                    best = csum / ccnt
            out[ix] = best
    free(sums)
    free(cnts)
    return out_arr


def pairwise_qnorm(const double[::1] lo, const double[::1] h, const long[::1] n, double offset,
                   const int[::1] tk, const double[::1] tc,
                   const signed char[:, ::1] tax, const signed char[:, ::1] tay,
                   const double[::1] qexp, double two_n, const double[:, ::1] centers):
    cdef int d = lo.shape[0]
    cdef long M = 1
    cdef int i
    for i in range(d):
        M *= n[i]
    cdef long C = centers.shape[0]
    cdef int nt = tk.shape[0]
    out_arr = np.empty((C, M))
    cdef double[:, ::1] out = out_arr
    cdef double x[8]
    cdef double negc[8]
    cdef double z[8]
    cdef long ic, ix
    cdef const signed char* taxp = NULL
    cdef const signed char* tayp = NULL
    cdef const int* tkp = NULL
    cdef const double* tcp = NULL
    if nt > 0:
        taxp = &tax[0, 0]
        tayp = &tay[0, 0]
        tkp = &tk[0]
        tcp = &tc[0]
    with nogil:
        for ic in range(C):
            for i in range(d):
                negc[i] = -centers[ic, i]
            for ix in range(M):
                _point(x, &lo[0], &h[0], &n[0], offset, ix, d)
                _law(z, negc, x, d, nt, tkp, tcp, taxp, tayp)
                out[ic, ix] = _qnorm(z, &qexp[0], two_n, d)
    return out_arr
