"""Exact arithmetic of graded nilpotent Lie groups in exponential coordinates.

A group is described by dilation weights v_1 <= ... <= v_d and a sparse
bracket table c^k_{ij} giving [X_i, X_j] = sum_k c^k_{ij} X_k.  The group
law in exponential coordinates of the first kind is the truncated
Baker-Campbell-Hausdorff series, which is an exact polynomial map for
nilpotency step <= 4 (the step supported here).  All coefficients are kept
as exact rationals; the runtime law is a flat monomial table that both the
vectorized numpy routines and the compiled kernels evaluate.

Points are plain numpy arrays of shape (d,) or batched (..., d).  The
identity is the zero vector and inversion is coordinate negation.
"""

import json
from fractions import Fraction

import numpy as np

__all__ = [
    "GradedAlgebra",
    "QuasiNorm",
    "load_group",
    "group_from_dict",
    "bch_multiply",
    "inverse",
    "dilate",
    "hom_degree",
    "ceil_floor",
    "left_jacobian",
    "flow_product_ode",
    "estimate_gamma",
]

# BCH series coefficients through total degree 4:
#   Z = X + Y + 1/2 [X,Y] + 1/12 [X,[X,Y]] - 1/12 [Y,[X,Y]] - 1/24 [Y,[X,[X,Y]]]
# Exact for nilpotency step <= 4; degree-5 terms would require step >= 5.
_MAX_STEP = 4


class GroupError(ValueError):
    pass


def _poly_add(p, q):
    out = dict(p)
    for mono, c in q.items():
        c2 = out.get(mono, Fraction(0)) + c
        if c2:
            out[mono] = c2
        else:
            out.pop(mono, None)
    return out


def _poly_scale(p, s):
    if not s:
        return {}
    return {m: c * s for m, c in p.items()}


def _poly_mul(p, q):
    out = {}
    for (ax1, ay1), c1 in p.items():
        for (ax2, ay2), c2 in q.items():
            mono = (
                tuple(a + b for a, b in zip(ax1, ax2)),
                tuple(a + b for a, b in zip(ay1, ay2)),
            )
            c = out.get(mono, Fraction(0)) + c1 * c2
            if c:
                out[mono] = c
            else:
                out.pop(mono, None)
    return out


class GradedAlgebra:
    """A graded nilpotent Lie algebra with its polynomial group law.

    Parameters
    ----------
    weights : sequence of positive ints, nondecreasing, v_1 >= 1
    brackets : dict mapping (i, j, k) -> coefficient, 0-based, i < j,
        meaning [X_i, X_j] = sum_k c^k_{ij} X_k.  Antisymmetric completion
        is automatic.
    name : optional label
    """

    def __init__(self, weights, brackets=None, name=""):
        weights = [int(v) for v in weights]
        if not weights:
            raise GroupError("empty weight list")
        if any(v < 1 for v in weights):
            raise GroupError("dilation weights must satisfy v_i >= 1")
        if any(weights[i] > weights[i + 1] for i in range(len(weights) - 1)):
            raise GroupError("weights must be nondecreasing")
        self.name = name
        self.weights = tuple(weights)
        self.dim = len(weights)
        self.Q = sum(weights)

        table = {}
        for (i, j, k), c in (brackets or {}).items():
            if not (0 <= i < self.dim and 0 <= j < self.dim and 0 <= k < self.dim):
                raise GroupError("bracket index out of range: (%d,%d,%d)" % (i, j, k))
            if i == j:
                if c:
                    raise GroupError("[X_i, X_i] must vanish")
                continue
            frac = Fraction(c)
            if i > j:
                i, j, frac = j, i, -frac
            if frac:
                table[(i, j, k)] = table.get((i, j, k), Fraction(0)) + frac
        self._table = {key: c for key, c in table.items() if c}

        # dense structure constants, full antisymmetric table
        C = np.zeros((self.dim, self.dim, self.dim))
        for (i, j, k), c in self._table.items():
            C[i, j, k] += float(c)
            C[j, i, k] -= float(c)
        self.structure = C
        self.is_abelian = not self._table

        self._check_grading()
        self._check_jacobi()
        self.step = self._derive_step()
        if self.step > _MAX_STEP:
            raise GroupError(
                "nilpotency step %d exceeds the supported maximum %d"
                % (self.step, _MAX_STEP)
            )
        self._law = self._build_law()
        self._law_terms = self._flatten_law()

    # -- validation --------------------------------------------------------

    def bracket_coeff(self, i, j, k):
        if i == j:
            return Fraction(0)
        if i < j:
            return self._table.get((i, j, k), Fraction(0))
        return -self._table.get((j, i, k), Fraction(0))

    def _check_grading(self):
        for (i, j, k), c in self._table.items():
            if c and self.weights[k] != self.weights[i] + self.weights[j]:
                raise GroupError(
                    "bracket [X_%d, X_%d] -> X_%d violates the grading "
                    "v_k = v_i + v_j" % (i, j, k)
                )

    def _bracket_vec(self, u, v):
        # u, v: coordinate vectors of Fractions; returns [u, v]
        out = [Fraction(0)] * self.dim
        for i in range(self.dim):
            if not u[i]:
                continue
            for j in range(self.dim):
                if not v[j]:
                    continue
                for k in range(self.dim):
                    c = self.bracket_coeff(i, j, k)
                    if c:
                        out[k] += u[i] * v[j] * c
        return out

    def _check_jacobi(self):
        d = self.dim
        basis = [[Fraction(int(i == r)) for i in range(d)] for r in range(d)]
        for i in range(d):
            for j in range(i + 1, d):
                for k in range(j + 1, d):
                    s = self._bracket_vec(self._bracket_vec(basis[i], basis[j]), basis[k])
                    s = [
                        a + b
                        for a, b in zip(
                            s,
                            self._bracket_vec(
                                self._bracket_vec(basis[j], basis[k]), basis[i]
                            ),
                        )
                    ]
                    s = [
                        a + b
                        for a, b in zip(
                            s,
                            self._bracket_vec(
                                self._bracket_vec(basis[k], basis[i]), basis[j]
                            ),
                        )
                    ]
                    if any(s):
                        raise GroupError(
                            "Jacobi identity fails on basis triple (%d,%d,%d)"
                            % (i, j, k)
                        )

    def _derive_step(self):
        d = self.dim
        span = np.eye(d)
        step = 1
        while True:
            cols = [
                np.einsum("jk,j->k", self.structure[i], col)
                for i in range(d)
                for col in span.T
            ]
            cols = [v for v in cols if np.any(np.abs(v) > 1e-14)]
            if not cols:
                return step
            A = np.asarray(cols).T
            rank = np.linalg.matrix_rank(A, tol=1e-10)
            if rank == 0:
                return step
            span = np.linalg.qr(A)[0][:, :rank]
            step += 1
            if step > 16:
                raise GroupError("bracket table does not look nilpotent")

    # -- group law ---------------------------------------------------------

    def _build_law(self):
        d = self.dim
        zero = tuple([0] * d)

        def e(i):
            t = [0] * d
            t[i] = 1
            return tuple(t)

        X = [{(e(i), zero): Fraction(1)} for i in range(d)]
        Y = [{(zero, e(i)): Fraction(1)} for i in range(d)]

        def pbracket(U, V):
            out = [{} for _ in range(d)]
            for i in range(d):
                for j in range(d):
                    if not U[i] or not V[j]:
                        continue
                    prod = _poly_mul(U[i], V[j])
                    for k in range(d):
                        c = self.bracket_coeff(i, j, k)
                        if c:
                            out[k] = _poly_add(out[k], _poly_scale(prod, c))
            return out

        C1 = pbracket(X, Y)            # [X,Y]
        C2a = pbracket(X, C1)          # [X,[X,Y]]
        C2b = pbracket(Y, C1)          # [Y,[X,Y]]
        C3 = pbracket(Y, C2a)          # [Y,[X,[X,Y]]]

        law = []
        for k in range(d):
            p = _poly_add(X[k], Y[k])
            p = _poly_add(p, _poly_scale(C1[k], Fraction(1, 2)))
            p = _poly_add(p, _poly_scale(C2a[k], Fraction(1, 12)))
            p = _poly_add(p, _poly_scale(C2b[k], Fraction(-1, 12)))
            p = _poly_add(p, _poly_scale(C3[k], Fraction(-1, 24)))
            law.append(p)
        return law

    def _flatten_law(self):
        # nonlinear monomials only; the linear part x_k + y_k is implicit
        d = self.dim
        ks, cs, axs, ays = [], [], [], []
        for k, p in enumerate(self._law):
            for (ax, ay), c in sorted(p.items()):
                if sum(ax) + sum(ay) == 1:
                    continue
                ks.append(k)
                cs.append(float(c))
                axs.append(ax)
                ays.append(ay)
        return {
            "k": np.asarray(ks, dtype=np.int32),
            "c": np.asarray(cs, dtype=np.float64),
            "ax": np.asarray(axs, dtype=np.int8).reshape(len(ks), d),
            "ay": np.asarray(ays, dtype=np.int8).reshape(len(ks), d),
        }

    @property
    def law_polynomials(self):
        """Exact rational group-law polynomials, one per coordinate.

        Each entry maps (x-exponents, y-exponents) -> Fraction.
        """
        return self._law

    @property
    def law_terms(self):
        return self._law_terms

    def multiply(self, x, y):
        return bch_multiply(self, x, y)

    def to_dict(self):
        return {
            "name": self.name,
            "dim": self.dim,
            "weights": list(self.weights),
            "brackets": [
                {"i": i + 1, "j": j + 1, "k": k + 1, "c": float(c)}
                for (i, j, k), c in sorted(self._table.items())
            ],
        }

    def __repr__(self):
        return "GradedAlgebra(%r, dim=%d, step=%d, Q=%d)" % (
            self.name,
            self.dim,
            self.step,
            self.Q,
        )


# -- point operations -------------------------------------------------------


def _check_dim(alg, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != alg.dim:
        raise GroupError(
            "dimension mismatch: point has %d coordinates, group has %d"
            % (x.shape[-1], alg.dim)
        )
    return x


def bch_multiply(alg, x, y):
    """Group product x * y; broadcasts over leading batch axes."""
    x = _check_dim(alg, x)
    y = _check_dim(alg, y)
    x, y = np.broadcast_arrays(x, y)
    z = x + y
    t = alg.law_terms
    if t["k"].size:
        z = z.copy()
        for k, c, ax, ay in zip(t["k"], t["c"], t["ax"], t["ay"]):
            term = np.full(x.shape[:-1], c)
            for i in np.nonzero(ax)[0]:
                term = term * x[..., i] ** int(ax[i])
            for i in np.nonzero(ay)[0]:
                term = term * y[..., i] ** int(ay[i])
            z[..., k] += term
    return z


def inverse(alg, x):
    return -_check_dim(alg, x)


def dilate(alg, t, x):
    """Anisotropic dilation: coordinate i scales by t**v_i."""
    x = _check_dim(alg, x)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise GroupError("dilation parameter must be positive")
    scale = t[..., None] ** np.asarray(alg.weights, dtype=np.float64)
    return x * scale


def hom_degree(alg, alpha):
    """Homogeneous degree [alpha] = sum v_i alpha_i and length |alpha|."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.shape[-1] != alg.dim or np.any(alpha < 0):
        raise GroupError("multi-index must have %d nonnegative entries" % alg.dim)
    w = np.asarray(alg.weights, dtype=np.int64)
    return int(np.sum(alpha * w, axis=-1)), int(np.sum(alpha, axis=-1))


def ceil_floor(alg, M):
    """max{|alpha| : [alpha] <= M}; equals floor(M / v_1)."""
    if M < 0:
        raise GroupError("M must be nonnegative")
    return int(M) // alg.weights[0]


def left_jacobian(alg, x):
    """Coefficient matrix A(x) of the left-invariant frame at x.

    Column j holds the coordinate components of X_j at x, obtained from the
    nilpotent Bernoulli series A(x) = I + ad_x/2 + ad_x^2/12 (exact for
    step <= 4 since the ad_x^3 coefficient vanishes and ad_x^4 = 0).
    """
    x = _check_dim(alg, x)
    ad = np.einsum("i,ijk->kj", x, alg.structure)
    eye = np.eye(alg.dim)
    return eye + ad / 2.0 + (ad @ ad) / 12.0


def flow_product_ode(alg, x, y, rtol=1e-10, atol=1e-12):
    """Independent product oracle: integrate the left-invariant flow.

    The curve c(t) = x * exp(t * sum_j y_j X_j) satisfies
    c'(t) = A(c(t)) y with the frame matrix A from `left_jacobian`;
    c(1) is the group product.  Uses only the structure constants, not the
    closed BCH series.
    """
    from scipy.integrate import solve_ivp

    x = _check_dim(alg, x)
    y = _check_dim(alg, y)

    def rhs(_, c):
        return left_jacobian(alg, c) @ y

    sol = solve_ivp(rhs, (0.0, 1.0), x, rtol=rtol, atol=atol, method="RK45")
    if not sol.success:
        raise RuntimeError("flow integration failed: %s" % sol.message)
    return sol.y[:, -1]


# -- quasi-norm --------------------------------------------------------------


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // np.gcd(out, v)
    return int(out)


class QuasiNorm:
    """Even-power homogeneous quasi-norm |x| = (sum |x_i|^(2N/v_i))^(1/2N).

    2N defaults to 2*lcm(v_i) so every exponent 2N/v_i is an even integer
    and the norm is smooth away from the origin.  gamma is the measured
    quasi-triangle constant; it is estimated by Monte-Carlo when not given.
    """

    def __init__(self, alg, two_n=None, gamma=None):
        self.alg = alg
        if two_n is None:
            two_n = 2 * _lcm(alg.weights)
        two_n = int(two_n)
        if two_n <= 0 or two_n % 2:
            raise GroupError("exponent 2N must be a positive even integer")
        n_half = two_n // 2
        for v in alg.weights:
            if n_half % v:
                raise GroupError("each weight must divide N = %d" % n_half)
        self.two_n = two_n
        self.exponents = np.asarray(
            [two_n // v for v in alg.weights], dtype=np.float64
        )
        self._gamma = gamma

    def __call__(self, x):
        x = _check_dim(self.alg, x)
        s = np.sum(np.abs(x) ** self.exponents, axis=-1)
        return s ** (1.0 / self.two_n)

    @property
    def gamma(self):
        if self._gamma is None:
            self._gamma = estimate_gamma(self.alg, self, seed=0)[0]
        return self._gamma

    def ball_extent(self, r):
        """Per-coordinate bounding box half-widths of B_r(e)."""
        return np.asarray(
            [r ** v for v in self.alg.weights], dtype=np.float64
        )

    def translate_extent(self, x, r):
        """Half-widths e_i with x * B_r(e) inside the box |z_i - x_i| <= e_i.

        Bounds each law monomial by |c| |x^ax| r^[ay]; conservative.
        """
        x = _check_dim(self.alg, x)
        w = np.asarray(self.alg.weights, dtype=np.float64)
        ext = np.broadcast_to(r ** w, x.shape).copy()
        t = self.alg.law_terms
        for k, c, ax, ay in zip(t["k"], t["c"], t["ax"], t["ay"]):
            term = np.full(x.shape[:-1], abs(c))
            for i in np.nonzero(ax)[0]:
                term = term * np.abs(x[..., i]) ** int(ax[i])
            deg = float(np.dot(ay, self.alg.weights))
            ext[..., k] += term * r ** deg
        return ext


def estimate_gamma(alg, qnorm, n_samples=100_000, seed=0):
    """Monte-Carlo sup of |xy| / (|x| + |y|).

    Samples points with log-uniform radii so that both the small- and
    large-scale regimes contribute.  Returns (gamma, pairs) with the pairs
    retained so that dependent inequality checks can reuse the exact sample.
    """
    rng = np.random.default_rng(seed)
    d = alg.dim
    u = rng.standard_normal((n_samples, d))
    v = rng.standard_normal((n_samples, d))
    ru = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n_samples))
    rv = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n_samples))
    x = dilate(alg, ru / np.maximum(qnorm(u), 1e-300), u)
    y = dilate(alg, rv / np.maximum(qnorm(v), 1e-300), v)
    num = qnorm(bch_multiply(alg, x, y))
    den = qnorm(x) + qnorm(y)
    ratios = num / den
    gamma = float(max(np.max(ratios), 1.0))
    return gamma, (x, y)


# -- serialization -----------------------------------------------------------


def group_from_dict(spec):
    """Build a GradedAlgebra from the JSON group schema (1-based indices)."""
    try:
        dim = int(spec["dim"])
        weights = spec["weights"]
    except KeyError as exc:
        raise GroupError("group file missing field %s" % exc)
    if len(weights) != dim:
        raise GroupError("dim does not match the weight list")
    brackets = {}
    for entry in spec.get("brackets", []):
        i, j, k = int(entry["i"]) - 1, int(entry["j"]) - 1, int(entry["k"]) - 1
        brackets[(i, j, k)] = brackets.get((i, j, k), 0) + entry["c"]
    return GradedAlgebra(weights, brackets, name=spec.get("name", ""))


def load_group(path):
    with open(path) as fh:
        return group_from_dict(json.load(fh))
