"""Homogeneous polynomial calculus, invariant vector fields, Taylor expansion.

Polynomials are finite coefficient maps over multi-indices; left- and
right-invariant vector fields are first-order operators with polynomial
coefficients extracted exactly from the group-law monomial table.  The left
Taylor polynomial is assembled from word derivatives, with two independent
routes (direct word evaluation and a Poincare-Birkhoff-Witt reordering into
standard-form derivatives) whose agreement is part of the test suite.
"""

import itertools
from fractions import Fraction

import numpy as np

from .groups import GroupError, bch_multiply, ceil_floor

__all__ = [
    "HomPolynomial",
    "VectorField",
    "left_field",
    "right_field",
    "apply_field_word",
    "words_with_weight_at_most",
    "taylor_polynomial",
    "rough_taylor_polynomial",
    "verify_taylor_defining",
    "taylor_remainder_report",
    "coordinate_poly",
    "reorder_word",
]

H_FD_DEFAULT = 1e-4  # central finite-difference step for callable derivatives


class HomPolynomial:
    """Polynomial sum_alpha c_alpha x^alpha on a graded group."""

    def __init__(self, alg, coeffs=None):
        self.alg = alg
        self.coeffs = {}
        for mono, c in (coeffs or {}).items():
            if c:
                mono = tuple(int(m) for m in mono)
                if len(mono) != alg.dim or any(m < 0 for m in mono):
                    raise GroupError("bad multi-index %r" % (mono,))
                self.coeffs[mono] = self.coeffs.get(mono, 0) + c
        self.coeffs = {m: c for m, c in self.coeffs.items() if c}

    @property
    def hom_degree(self):
        w = self.alg.weights
        return max(
            (sum(a * v for a, v in zip(m, w)) for m in self.coeffs), default=0
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1])
        for mono, c in self.coeffs.items():
            term = np.full(x.shape[:-1], float(c))
            for i, e in enumerate(mono):
                if e:
                    term = term * x[..., i] ** e
            out = out + term
        return out if out.shape else float(out)

    def diff(self, i):
        out = {}
        for mono, c in self.coeffs.items():
            if mono[i]:
                m2 = list(mono)
                m2[i] -= 1
                key = tuple(m2)
                out[key] = out.get(key, 0) + c * mono[i]
        return HomPolynomial(self.alg, out)

    def __add__(self, other):
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, 0) + c
        return HomPolynomial(self.alg, out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, s):
        return HomPolynomial(self.alg, {m: c * s for m, c in self.coeffs.items()})

    def __mul__(self, other):
        out = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                key = tuple(a + b for a, b in zip(m1, m2))
                out[key] = out.get(key, 0) + c1 * c2
        return HomPolynomial(self.alg, out)

    def max_coeff_diff(self, other):
        keys = set(self.coeffs) | set(other.coeffs)
        return max(
            (abs(float(self.coeffs.get(k, 0)) - float(other.coeffs.get(k, 0))) for k in keys),
            default=0.0,
        )

    def __repr__(self):
        terms = sorted(self.coeffs.items())
        return "HomPolynomial({%s})" % ", ".join(
            "%r: %s" % (m, c) for m, c in terms
        )


def coordinate_poly(alg, i):
    mono = tuple(int(j == i) for j in range(alg.dim))
    return HomPolynomial(alg, {mono: Fraction(1)})


class VectorField:
    """First-order operator sum_i a_i(x) d/dx_i with polynomial coefficients.

    Basis left/right invariant fields carry a flow tag so that callable
    derivatives can use exact group-translation differences instead of
    coordinate stencils.
    """

    def __init__(self, alg, coeff_polys, degree=None, flow=None):
        self.alg = alg
        self.coeffs = list(coeff_polys)
        self.degree = degree
        self.flow = flow  # ("left"|"right", j) or None

    def apply_poly(self, p):
        out = HomPolynomial(self.alg, {})
        for i, a in enumerate(self.coeffs):
            if a.coeffs:
                out = out + a * p.diff(i)
        return out

    def apply_callable(self, f, x, h=H_FD_DEFAULT):
        alg = self.alg
        x = np.asarray(x, dtype=np.float64)
        if self.flow is not None:
            side, j = self.flow
            step = np.zeros(alg.dim)
            step[j] = h
            if side == "left":
                xp = bch_multiply(alg, x, step)
                xm = bch_multiply(alg, x, -step)
            else:
                xp = bch_multiply(alg, step, x)
                xm = bch_multiply(alg, -step, x)
            return (f(xp) - f(xm)) / (2.0 * h)
        total = 0.0
        for i, a in enumerate(self.coeffs):
            if not a.coeffs:
                continue
            e = np.zeros(alg.dim)
            e[i] = h
            total = total + a(x) * (f(x + e) - f(x - e)) / (2.0 * h)
        return total

    def __repr__(self):
        parts = []
        for i, a in enumerate(self.coeffs):
            if a.coeffs:
                parts.append("(%r) d_%d" % (a, i + 1))
        return "VectorField[%s]" % " + ".join(parts)


def _field_from_law(alg, j, side):
    d = alg.dim
    ej = tuple(int(i == j) for i in range(d))
    zero = tuple([0] * d)
    coeffs = []
    for k in range(d):
        poly = {}
        if k == j:
            poly[zero] = Fraction(1)
        for (ax, ay), c in alg.law_polynomials[k].items():
            if side == "left" and ay == ej and sum(ax) > 0:
                poly[ax] = poly.get(ax, Fraction(0)) + c
            if side == "right" and ax == ej and sum(ay) > 0:
                poly[ay] = poly.get(ay, Fraction(0)) + c
        coeffs.append(HomPolynomial(alg, poly))
    return VectorField(alg, coeffs, degree=alg.weights[j], flow=(side, j))


def left_field(alg, j):
    """Left-invariant X_j: differentiation of t -> x * (t e_j) at t = 0."""
    if not 0 <= j < alg.dim:
        raise GroupError("field index out of range")
    return _field_from_law(alg, j, "left")


def right_field(alg, j):
    if not 0 <= j < alg.dim:
        raise GroupError("field index out of range")
    return _field_from_law(alg, j, "right")


def apply_field_word(fields, f, x, h=H_FD_DEFAULT):
    """Apply the composition fields[0] fields[1] ... fields[-1] to f at x.

    Polynomials are differentiated exactly; callables use nested central
    differences (O(h^2) per level).
    """
    if isinstance(f, HomPolynomial):
        g = f
        for fld in reversed(fields):
            g = fld.apply_poly(g)
        return g(np.asarray(x, dtype=np.float64))
    g = f
    for fld in reversed(fields):
        g = (lambda gg, ff: lambda p: ff.apply_callable(gg, p, h))(g, fld)
    return g(np.asarray(x, dtype=np.float64))


# -- words and Taylor polynomials -------------------------------------------


def words_with_weight_at_most(alg, M):
    """All words (i_1, ..., i_k), k >= 1, with v_{i_1}+...+v_{i_k} <= M."""
    out = []
    frontier = [((), 0)]
    while frontier:
        nxt = []
        for word, wt in frontier:
            for i in range(alg.dim):
                w2 = wt + alg.weights[i]
                if w2 <= M:
                    nxt.append((word + (i,), w2))
        out.extend(w for w, _ in nxt)
        frontier = nxt
    return out


def standard_indices_up_to(alg, M):
    """Multi-indices alpha with [alpha] <= M, lexicographically sorted."""
    ranges = [range(int(M // v) + 1) for v in alg.weights]
    out = []
    for alpha in itertools.product(*ranges):
        if sum(a * v for a, v in zip(alpha, alg.weights)) <= M:
            out.append(alpha)
    return sorted(out)


def word_of_index(alpha):
    """Standard-form word X_1^{a_1} ... X_d^{a_d} as an index tuple."""
    word = []
    for i, a in enumerate(alpha):
        word.extend([i] * a)
    return tuple(word)


def _word_derivative(alg, word, f, x, h, cache):
    key = word
    if key in cache:
        return cache[key]
    fields = [left_field(alg, i) for i in word]
    val = apply_field_word(fields, f, x, h)
    cache[key] = val
    return val


def taylor_polynomial(alg, f, x, M, h=H_FD_DEFAULT):
    """Left Taylor polynomial of f at x of homogeneous degree <= M.

    P(y) = f(x) + sum over words w = (i_1..i_k) of weight <= M of
    (X_{i_1} ... X_{i_k} f)(x) / k! * y_{i_1} ... y_{i_k}.
    """
    if M < 0:
        raise GroupError("Taylor degree must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if isinstance(f, HomPolynomial):
        f0 = f(x)
    else:
        f0 = float(f(x))
    zero = tuple([0] * alg.dim)
    coeffs = {zero: f0}
    cache = {}
    for word in words_with_weight_at_most(alg, M):
        k = len(word)
        deriv = _word_derivative(alg, word, f, x, h, cache)
        mono = [0] * alg.dim
        for i in word:
            mono[i] += 1
        mono = tuple(mono)
        fact = 1.0
        for m in range(2, k + 1):
            fact *= m
        coeffs[mono] = coeffs.get(mono, 0.0) + deriv / fact
    return HomPolynomial(alg, coeffs)


def reorder_word(alg, word):
    """Expand a field word in the standard PBW basis.

    Uses X_i X_j = X_j X_i + [X_i, X_j] repeatedly until all words are
    index-nondecreasing.  Returns a dict standard word -> coefficient.
    """
    pending = {tuple(word): Fraction(1)}
    out = {}
    while pending:
        w, c = pending.popitem()
        pos = next((l for l in range(len(w) - 1) if w[l] > w[l + 1]), None)
        if pos is None:
            out[w] = out.get(w, Fraction(0)) + c
            continue
        i, j = w[pos], w[pos + 1]
        swapped = w[:pos] + (j, i) + w[pos + 2:]
        pending[swapped] = pending.get(swapped, Fraction(0)) + c
        for k in range(alg.dim):
            cc = alg.bracket_coeff(i, j, k)
            if cc:
                wk = w[:pos] + (k,) + w[pos + 2:]
                pending[wk] = pending.get(wk, Fraction(0)) + c * cc
    return {w: c for w, c in out.items() if c}


def rough_taylor_polynomial(alg, f, x, M, h=H_FD_DEFAULT):
    """Taylor polynomial via PBW-reordered standard derivatives.

    Expands every word derivative in standard-form derivatives X^beta f(x)
    before summation; must agree with `taylor_polynomial` coefficient-wise.
    """
    x = np.asarray(x, dtype=np.float64)
    f0 = f(x) if isinstance(f, HomPolynomial) else float(f(x))
    zero = tuple([0] * alg.dim)
    coeffs = {zero: f0}
    std_cache = {}
    for word in words_with_weight_at_most(alg, M):
        k = len(word)
        fact = 1.0
        for m in range(2, k + 1):
            fact *= m
        mono = [0] * alg.dim
        for i in word:
            mono[i] += 1
        mono = tuple(mono)
        total = 0.0
        for std_word, c in reorder_word(alg, word).items():
            total += float(c) * _word_derivative(alg, std_word, f, x, h, std_cache)
        coeffs[mono] = coeffs.get(mono, 0.0) + total / fact
    return HomPolynomial(alg, coeffs)


def verify_taylor_defining(alg, P, f, x, M, h=H_FD_DEFAULT):
    """Max over [alpha] <= M of |X^alpha P(e) - X^alpha f(x)|."""
    e = np.zeros(alg.dim)
    x = np.asarray(x, dtype=np.float64)
    worst = 0.0
    for alpha in standard_indices_up_to(alg, M):
        word = word_of_index(alpha)
        fields = [left_field(alg, i) for i in word]
        lhs = apply_field_word(fields, P, e)
        rhs = apply_field_word(fields, f, x, h)
        worst = max(worst, abs(lhs - rhs))
    return worst


def excluded_indices(alg, M):
    """alpha with |alpha| <= ceil_floor(M)+1 and [alpha] > M."""
    top = ceil_floor(alg, M) + 1
    w = alg.weights
    out = []
    for alpha in itertools.product(*(range(top + 1) for _ in range(alg.dim))):
        if sum(alpha) <= top and sum(a * v for a, v in zip(alpha, w)) > M:
            out.append(alpha)
    return out


def taylor_remainder_report(
    alg,
    qnorm,
    f,
    x,
    M,
    radii=None,
    n_dirs=24,
    eta=2.0,
    n_sup=64,
    h=H_FD_DEFAULT,
    seed=0,
):
    """Empirical check of the left Taylor inequality.

    Returns the fitted constant C = max LHS/RHS over the sample, the
    log-log decay slope of the remainder |f(xy) - P(y)| as |y| -> 0, and
    the smallest excluded homogeneous degree (the predicted slope).
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.float64)
    if radii is None:
        radii = np.logspace(-2.5, -0.5, 9)
    P = taylor_polynomial(alg, f, x, M, h)
    dirs = rng.standard_normal((n_dirs, alg.dim))
    dirs = dirs / qnorm(dirs)[:, None]

    excl = excluded_indices(alg, M)
    min_excl = min(sum(a * v for a, v in zip(al, alg.weights)) for al in excl)
    topvals = []
    lhs_max = np.zeros(len(radii))
    ratio_max = 0.0
    eta_pow = eta ** (ceil_floor(alg, M) + 1)
    for ri, r in enumerate(radii):
        w = np.asarray(alg.weights, dtype=np.float64)
        ys = dirs * (r ** w)
        xy = bch_multiply(alg, x, ys)
        fvals = np.asarray([f(p) for p in xy])
        pvals = np.asarray([P(y) for y in ys])
        lhs = np.abs(fvals - pvals)
        lhs_max[ri] = np.max(lhs)
        # right-hand side per sample point
        zdirs = rng.standard_normal((n_sup, alg.dim))
        zdirs = zdirs / qnorm(zdirs)[:, None]
        for y, l in zip(ys, lhs):
            ry = qnorm(y) * eta_pow
            zs = np.vstack([np.zeros(alg.dim), zdirs * (ry ** w)])
            xz = bch_multiply(alg, x, zs)
            rhs = 0.0
            for alpha in excl:
                word = word_of_index(alpha)
                fields = [left_field(alg, i) for i in word]
                sup = max(abs(apply_field_word(fields, f, p, h)) for p in xz)
                rhs += qnorm(y) ** sum(a * v for a, v in zip(alpha, alg.weights)) * sup
            if rhs > 0:
                ratio_max = max(ratio_max, l / rhs)
        topvals.append(np.max(lhs))
    mask = lhs_max > 1e-13
    if np.sum(mask) >= 3:
        slope = np.polyfit(np.log(radii[mask]), np.log(lhs_max[mask]), 1)[0]
    else:
        slope = float("inf")  # remainder at the numerical floor
    return {
        "C": ratio_max,
        "slope": float(slope),
        "expected_slope": float(min_excl),
        "eta": eta,
        "lhs_max": lhs_max,
        "radii": np.asarray(radii),
    }
