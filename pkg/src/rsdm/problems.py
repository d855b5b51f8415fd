"""Benchmark objectives over orthonormal matrices.

Each factory returns a Problem whose value and ambient gradient extend
smoothly off the constraint set, so finite-difference probes in arbitrary
matrix directions are meaningful.  Analytic optima are attached where a
closed form exists.
"""

import numpy as np

from .manifold import as_matrix, qr_orthonormalize

# Below this magnitude the relative optimality gap divides by noise; fall
# back to the absolute gap instead.
OPTGAP_DENOMINATOR_FLOOR = 1e-12


class Problem:
    """Objective F on n x p orthonormal matrices, with ambient gradient.

    Parameters
    ----------
    name : str
    n, p : dimensions
    value : callable, (n, p) array -> float
    gradient : callable, (n, p) array -> (n, p) array
    optimum : float or None
        F at a global minimizer, when known in closed form.
    stochastic_gradient : callable or None
        (x, rng, batch_size, indices) -> (n, p) array; unbiased for the full
        gradient under uniform-with-replacement batching.
    num_components : int or None
        Population size N behind the stochastic gradient.
    data : dict
        The generated matrices defining the instance, for inspection.
    """

    def __init__(self, name, n, p, value, gradient, optimum=None,
                 stochastic_gradient=None, num_components=None, data=None):
        self.name = name
        self.n = int(n)
        self.p = int(p)
        self._value = value
        self._gradient = gradient
        self.optimum = None if optimum is None else float(optimum)
        self._stochastic_gradient = stochastic_gradient
        self.num_components = num_components
        self.data = {} if data is None else data

    @property
    def dims(self):
        return (self.n, self.p)

    @property
    def has_stochastic_gradient(self):
        return self._stochastic_gradient is not None

    def value(self, x):
        return float(self._value(as_matrix(x)))

    def gradient(self, x):
        return self._gradient(as_matrix(x))

    def stochastic_gradient(self, x, rng, batch_size=1, indices=None):
        """Batch-mean component gradient.

        Draws `batch_size` component indices uniformly with replacement from
        rng unless `indices` fixes the batch explicitly (e.g. a full sweep).
        """
        if self._stochastic_gradient is None:
            raise ValueError(f"{self.name} has no stochastic gradient")
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        return self._stochastic_gradient(as_matrix(x), rng, batch_size, indices)

    def __repr__(self):
        return f"Problem({self.name}, n={self.n}, p={self.p})"


def procrustes_problem(a, b):
    """Alignment objective ||X A - B||_F^2 from given data matrices.

    The minimizer is W V^T where W S V^T is the thin SVD of B A^T, giving the
    closed-form optimum ||A||^2 + ||B||^2 - 2 tr(S).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = a.shape[0]
    n = b.shape[0]
    if a.shape != (p, p) or b.shape != (n, p) or n < p:
        raise ValueError(f"need A (p, p) and B (n, p) with n >= p, got {a.shape}, {b.shape}")
    singvals = np.linalg.svd(b @ a.T, compute_uv=False)
    optimum = float(np.sum(a * a) + np.sum(b * b) - 2.0 * np.sum(singvals[:p]))

    def value(x):
        resid = x @ a - b
        return np.sum(resid * resid)

    def gradient(x):
        return 2.0 * (x @ a - b) @ a.T

    return Problem("procrustes", n, p, value, gradient, optimum=optimum,
                   data={"a": a, "b": b})


def make_procrustes(n, p, rng):
    """Random alignment instance with standard Gaussian A (p x p), B (n x p)."""
    if n < p:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    a = rng.standard_normal((p, p))
    b = rng.standard_normal((n, p))
    return procrustes_problem(a, b)


def make_pca(n, p, condition_number, rng):
    """Dominant-subspace objective -tr(X^T A X) for a random covariance A.

    A = Q diag(lam) Q^T with Q Haar orthogonal and lam geometrically decaying
    from 1 down to 1/condition_number, so the spectrum and hence the optimum
    -(lam_1 + ... + lam_p) are pinned exactly.
    """
    if n < p:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    if condition_number < 1:
        raise ValueError(f"condition_number must be >= 1, got {condition_number}")
    q = qr_orthonormalize(rng.standard_normal((n, n)))
    if n > 1:
        ratio = condition_number ** (-1.0 / (n - 1))
    else:
        ratio = 1.0
    lam = ratio ** np.arange(n)
    a = (q * lam) @ q.T
    a = (a + a.T) / 2.0
    optimum = -float(np.sum(lam[:p]))

    def value(x):
        return -np.sum(x * (a @ x))

    def gradient(x):
        return -2.0 * (a @ x)

    return Problem("pca", n, p, value, gradient, optimum=optimum,
                   data={"a": a, "q": q, "eigenvalues": lam})


def make_qap(n, rng):
    """Quadratic-assignment relaxation tr(A^T (X.X) B (X.X)^T) on square X.

    Here X.X is the elementwise square, which is doubly stochastic when X is
    orthogonal.  The gradient follows from the chain rule through H = X.X:

        dF = <A^T dH B + A dH B^T, ...> with dH = 2 X . dX,

    giving grad F = 2 [A H B^T + A^T H B] . X.  There is no closed-form
    optimum; traces report raw values.
    """
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))

    def value(x):
        h = x * x
        return np.sum(a * (h @ b @ h.T))

    def gradient(x):
        h = x * x
        return 2.0 * (a @ h @ b.T + a.T @ h @ b) * x

    return Problem("qap", n, n, value, gradient, data={"a": a, "b": b})


def make_stochastic_pca(n, p, num_samples, noise_free, rng):
    """Finite-sum variance objective -(1/N) sum_i ||z_i^T X||^2.

    Component gradients are -2 z_i (z_i^T X); batches are uniform with
    replacement.  With noise_free=True every component is replaced by the
    averaged quadratic form itself, so the stochastic gradient degenerates to
    the exact one (zero-variance case).
    """
    if n < p:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    z = rng.standard_normal((num_samples, n))
    cov = z.T @ z / num_samples
    cov = (cov + cov.T) / 2.0
    eigvals = np.linalg.eigvalsh(cov)  # ascending
    optimum = -float(np.sum(eigvals[-p:]))

    def value(x):
        return -np.sum(x * (cov @ x))

    def gradient(x):
        return -2.0 * (cov @ x)

    if noise_free:
        def stochastic_gradient(x, rng_, batch_size, indices):
            # every component equals the mean objective; no draw needed
            return gradient(x)
    else:
        def stochastic_gradient(x, rng_, batch_size, indices):
            if indices is None:
                indices = rng_.integers(0, num_samples, size=batch_size)
            zb = z[np.asarray(indices)]
            return (-2.0 / len(zb)) * (zb.T @ (zb @ x))

    return Problem("stochastic_pca", n, p, value, gradient, optimum=optimum,
                   stochastic_gradient=stochastic_gradient,
                   num_components=num_samples,
                   data={"z": z, "cov": cov, "noise_free": noise_free})


def optgap(problem, x):
    """Optimality gap |F(X) - F*| / |F*|, absolute when F* is near zero."""
    if problem.optimum is None:
        raise ValueError(f"{problem.name} has no analytic optimum")
    return gap_from_value(problem.value(x), problem.optimum)


def gap_from_value(value, optimum):
    """Same metric as optgap, from a precomputed objective value."""
    gap = abs(value - optimum)
    if abs(optimum) > OPTGAP_DENOMINATOR_FLOOR:
        return gap / abs(optimum)
    return gap
