"""Geometry of orthonormal-column matrices.

Points live on the set St(n, p) = {X : X^T X = I_p} (the square case n = p
is the orthogonal group), tangent vectors satisfy X^T U + U^T X = 0, and the
metric is the plain Frobenius inner product.  Everything here is a pure
function on immutable values; random number generators are always passed in.
"""

import enum

import numpy as np
import scipy.linalg


class RetractionKind(enum.Enum):
    """Maps from a tangent vector back onto the constraint set."""

    QR = "qr"
    POLAR = "polar"
    CAYLEY = "cayley"
    EXPONENTIAL = "exponential"


# Cayley and the geodesic (exponential) map are only provided on the square
# orthogonal group, where the generator W = U X^T is skew.
SQUARE_ONLY = (RetractionKind.CAYLEY, RetractionKind.EXPONENTIAL)

CONSTRUCTION_TOL = 1e-10


def as_matrix(x):
    """Coerce a point-like object (StiefelPoint or array) to a float array."""
    if isinstance(x, StiefelPoint):
        return x.data
    return np.asarray(x, dtype=float)


class StiefelPoint:
    """An n x p matrix with orthonormal columns.

    Parameters
    ----------
    data : array_like, shape (n, p) with p <= n
    validate : bool
        Check the orthonormality residual at construction.  Solvers that
        already guarantee feasibility pass False to skip the O(n p^2) check.
    """

    __slots__ = ("data", "n", "p")

    def __init__(self, data, validate=True, tol=CONSTRUCTION_TOL):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"point must be a matrix, got ndim={data.ndim}")
        n, p = data.shape
        if not 1 <= p <= n:
            raise ValueError(f"need n >= p >= 1, got shape ({n}, {p})")
        if validate:
            res = feasibility_residual(data)
            if res > tol:
                raise ValueError(
                    f"columns are not orthonormal: residual {res:.3e} > {tol:.1e}"
                )
        self.data = data
        self.n = n
        self.p = p

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"StiefelPoint(n={self.n}, p={self.p})"


class TangentVector:
    """A direction U at a base point X, with X^T U + U^T X = 0."""

    __slots__ = ("data", "base")

    def __init__(self, data, base, validate=True, tol=CONSTRUCTION_TOL):
        data = np.asarray(data, dtype=float)
        if data.shape != base.shape:
            raise ValueError(
                f"tangent shape {data.shape} does not match base {base.shape}"
            )
        if validate:
            s = base.data.T @ data
            res = np.linalg.norm(s + s.T)
            if res > tol:
                raise ValueError(f"not tangent at base: residual {res:.3e}")
        self.data = data
        self.base = base

    @property
    def shape(self):
        return self.data.shape

    def norm(self):
        return float(np.linalg.norm(self.data))

    def __repr__(self):
        return f"TangentVector(shape={self.data.shape})"


class SkewMatrix:
    """An r x r matrix with A + A^T = 0, exact by construction.

    The strict lower triangle of the input is mirrored with flipped sign, so
    the invariant holds bit for bit regardless of how the input was computed.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"skew matrix must be square, got {data.shape}")
        lower = np.tril(data, -1)
        self.data = lower - lower.T

    @property
    def shape(self):
        return self.data.shape

    def norm_sq(self):
        """Squared Frobenius norm."""
        return float(np.sum(self.data * self.data))

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.data.astype(dtype)
        return self.data

    def __repr__(self):
        return f"SkewMatrix(r={self.data.shape[0]})"


def skew_part(a):
    """Return (A - A^T)/2 as a SkewMatrix.

    The elementwise formula is already exactly skew in floating point; the
    constructor's mirroring keeps those values unchanged.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"skew_part needs a square matrix, got shape {a.shape}")
    return SkewMatrix((a - a.T) / 2.0)


def riemannian_gradient(x, g):
    """Project an ambient gradient G onto the tangent space at X.

    Returns G - X (X^T G + G^T X)/2, the Euclidean-metric Riemannian
    gradient.  Applying it twice changes nothing (it is a projection).
    """
    if not isinstance(x, StiefelPoint):
        x = StiefelPoint(x)
    g = np.asarray(g, dtype=float)
    if g.shape != x.shape:
        raise ValueError(f"gradient shape {g.shape} does not match point {x.shape}")
    xtg = x.data.T @ g
    sym = (xtg + xtg.T) / 2.0
    return TangentVector(g - x.data @ sym, x, validate=False)


def qr_orthonormalize(a):
    """Q factor of a thin QR decomposition, with diag(R) > 0.

    The sign fix makes the factor unique, so orthonormal inputs come back
    unchanged up to roundoff and Gaussian inputs are Haar distributed.
    """
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d


def retract(kind, x, u):
    """Move from X along tangent U and land back on the constraint set.

    All four kinds agree with X + U to first order.  CAYLEY and EXPONENTIAL
    require a square point (n = p).  An exactly zero tangent returns X
    unchanged.
    """
    if not isinstance(kind, RetractionKind):
        kind = RetractionKind(kind)
    xd = x.data if isinstance(x, StiefelPoint) else np.asarray(x, dtype=float)
    ud = u.data if isinstance(u, TangentVector) else np.asarray(u, dtype=float)
    if ud.shape != xd.shape:
        raise ValueError(f"tangent shape {ud.shape} does not match point {xd.shape}")
    if not ud.any():
        # retraction axiom: zero step is the identity, bit for bit
        return x if isinstance(x, StiefelPoint) else StiefelPoint(xd, validate=False)
    n, p = xd.shape
    if kind is RetractionKind.QR:
        out = qr_orthonormalize(xd + ud)
    elif kind is RetractionKind.POLAR:
        # closest orthonormal matrix to X + U, via its SVD
        w, _, vt = np.linalg.svd(xd + ud, full_matrices=False)
        out = w @ vt
    elif kind in SQUARE_ONLY:
        if n != p:
            raise ValueError(f"{kind.value} retraction needs a square point, got ({n}, {p})")
        m = ud @ xd.T
        w = (m - m.T) / 2.0  # exactly skew; kills roundoff asymmetry of U X^T
        if kind is RetractionKind.CAYLEY:
            half = 0.5 * w
            eye = np.eye(n)
            out = scipy.linalg.solve(eye - half, xd + half @ xd)
        else:
            out = scipy.linalg.expm(w) @ xd
    else:  # pragma: no cover
        raise ValueError(f"unknown retraction kind {kind!r}")
    return StiefelPoint(out, validate=False)


def feasibility_residual(x):
    """Frobenius distance of X^T X from the identity."""
    xd = as_matrix(x)
    p = xd.shape[1]
    gram = xd.T @ xd
    return float(np.linalg.norm(gram - np.eye(p)))


def random_stiefel(n, p, rng):
    """Draw a uniformly random point with orthonormal columns.

    Q factor of an n x p standard Gaussian matrix with the diag(R) > 0 sign
    fix, which gives the invariant (Haar) distribution.
    """
    if p > n:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    return StiefelPoint(qr_orthonormalize(rng.standard_normal((n, p))), validate=False)


def random_tangent(x, rng):
    """Unit-norm random tangent direction at X."""
    u = riemannian_gradient(x, rng.standard_normal(x.shape)).data
    nrm = np.linalg.norm(u)
    if nrm == 0.0:  # pragma: no cover
        raise ValueError("degenerate random tangent")
    return TangentVector(u / nrm, x, validate=False)


def retraction_bound_estimate(kind, x, trials, rng):
    """Largest observed stretch ||retract(tU) - X|| / (t ||U||).

    Sampled over random unit tangents and scales t in {0.01, 0.1, 1}.  The
    maximum is finite for every retraction kind and close to 1 for small t.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not isinstance(x, StiefelPoint):
        x = StiefelPoint(x)
    worst = 0.0
    for _ in range(trials):
        u = random_tangent(x, rng)
        for t in (0.01, 0.1, 1.0):
            moved = retract(kind, x, TangentVector(t * u.data, x, validate=False))
            ratio = np.linalg.norm(moved.data - x.data) / t
            if ratio > worst:
                worst = ratio
    return float(worst)
