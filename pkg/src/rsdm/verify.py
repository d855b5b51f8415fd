"""Independent numerical oracles for the core identities.

Everything here recomputes quantities from first principles (dense algebra,
finite differences, Monte Carlo) so the fast paths in the other modules have
something honest to be checked against.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .frames import Frame, SamplerKind, frame_apply, frame_apply_transpose, sample_frame
from .manifold import as_matrix
from .solvers import apply_submanifold_rotation, projected_gradient

# When every Monte Carlo draw agrees to roundoff (e.g. r = n, where the
# ratio is deterministically 1), the raw standard error collapses and the
# z-score would blow up on floating-point jitter alone.  Floor it.
SE_FLOOR_SCALE = 1e-12


@dataclass
class MonteCarloReport:
    """Sample mean against a closed-form target, with a z-score."""

    estimate: float
    std_error: float
    trials: int
    target: float
    z_score: float


@dataclass
class TailReport:
    """How often the projected energy clears half its expected share."""

    fraction: float
    std_error: float
    median_ratio: float
    mean_target: float
    threshold: float
    trials: int


def _floored_se(se, target):
    return max(se, SE_FLOOR_SCALE * max(1.0, abs(target)))


def fd_gradient(problem, x, h):
    """Central-difference gradient probe over all canonical directions.

    The objective is evaluated off the constraint set, which is fine because
    every problem extends smoothly to arbitrary matrices.
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    xd = as_matrix(x).copy()
    out = np.zeros_like(xd)
    n, p = xd.shape
    for i in range(n):
        for j in range(p):
            orig = xd[i, j]
            xd[i, j] = orig + h
            f_plus = problem.value(xd)
            xd[i, j] = orig - h
            f_minus = problem.value(xd)
            xd[i, j] = orig
            out[i, j] = (f_plus - f_minus) / (2.0 * h)
    return out


def skew_energy(x, g):
    """||skew(G X^T)||_F^2 assembled densely; the full-space energy."""
    xd = as_matrix(x)
    g = np.asarray(g, dtype=float)
    k = (g @ xd.T - xd @ g.T) / 2.0
    return float(np.sum(k * k))


def prop1_ratio(x, g, sampler, r, trials, rng):
    """Monte Carlo mean of projected over full skew energy, at fixed (X, G).

    Randomness is over frames only.  The closed-form expectation of the
    ratio is r(r-1)/(n(n-1)) for both samplers, which is the report target.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    xd = as_matrix(x)
    n = xd.shape[0]
    if not 2 <= r <= n:
        raise ValueError(f"need 2 <= r <= n, got r={r}, n={n}")
    denom = skew_energy(xd, g)
    if not denom > 0:
        raise ValueError("full-space gradient energy is zero; ratio undefined")
    target = r * (r - 1) / (n * (n - 1))
    ratios = np.empty(trials)
    for t in range(trials):
        frame = sample_frame(sampler, n, r, rng)
        ratios[t] = projected_gradient(frame, g, xd).skew.norm_sq() / denom
    estimate = float(np.mean(ratios))
    se = float(np.std(ratios, ddof=1) / np.sqrt(trials))
    se = _floored_se(se, target)
    return MonteCarloReport(
        estimate=estimate,
        std_error=se,
        trials=trials,
        target=target,
        z_score=(estimate - target) / se,
    )


def lemma2_check(x, g):
    """Full-space skew energy versus half the tangent-projection energy.

    Returns (lhs, rhs, ok) with lhs = ||skew(G X^T)||^2 and
    rhs = ||G - X (X^T G + G^T X)/2||^2 / 2; lhs >= rhs always holds, with
    exact equality in the square case.
    """
    xd = as_matrix(x)
    g = np.asarray(g, dtype=float)
    lhs = skew_energy(xd, g)
    xtg = xd.T @ g
    u = g - xd @ ((xtg + xtg.T) / 2.0)
    rhs = 0.5 * float(np.sum(u * u))
    return lhs, rhs, lhs >= rhs - 1e-10


def prop2_tail(x, g, r, trials, rng):
    """Fraction of Haar frames whose projected energy clears half its mean.

    Only a qualitative summary; the theoretical tail constant is
    indistinguishable from 1 at these sizes, so no sharp bound is asserted.
    """
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    xd = as_matrix(x)
    n = xd.shape[0]
    if not 2 <= r <= n:
        raise ValueError(f"need 2 <= r <= n, got r={r}, n={n}")
    denom = skew_energy(xd, g)
    if not denom > 0:
        raise ValueError("full-space gradient energy is zero; tail undefined")
    target = r * (r - 1) / (n * (n - 1))
    threshold = target / 2.0
    ratios = np.empty(trials)
    for t in range(trials):
        frame = sample_frame(SamplerKind.HAAR_ORTHOGONAL, n, r, rng)
        ratios[t] = projected_gradient(frame, g, xd).skew.norm_sq() / denom
    hits = ratios >= threshold
    fraction = float(np.mean(hits))
    se = float(np.sqrt(max(fraction * (1.0 - fraction), 0.0) / trials))
    return TailReport(
        fraction=fraction,
        std_error=se,
        median_ratio=float(np.median(ratios)),
        mean_target=target,
        threshold=threshold,
        trials=trials,
    )


def full_grad_norm_identity(x, g):
    """Two routes to ||skew(G X^T)||_F^2: dense n x n, and the trace form.

    The trace form (||G||^2 - tr(X G^T X G^T)) / 2 costs only O(n p^2) and
    is what traces use; the dense route is the oracle.
    """
    xd = as_matrix(x)
    g = np.asarray(g, dtype=float)
    dense = skew_energy(xd, g)
    m = g.T @ xd
    trace_form = 0.5 * (float(np.sum(g * g)) - float(np.sum(m * m.T)))
    return dense, trace_form


def complete_frame(frame):
    """Extend the r frame rows to a full n x n orthogonal matrix.

    Permutation frames are completed with the unused indices in increasing
    order; dense frames get an orthonormal basis of the row-space complement.
    """
    n, r = frame.n, frame.r
    if frame.is_permutation:
        rest = np.setdiff1d(np.arange(n), frame.indices)
        order = np.concatenate([frame.indices, rest])
        return np.eye(n)[order]
    null = scipy.linalg.null_space(frame.rows)
    if null.shape != (n, n - r):
        raise ValueError(
            f"completion failed: null space has shape {null.shape}, "
            f"expected ({n}, {n - r})")
    full = np.vstack([frame.rows, null.T])
    residual = np.linalg.norm(full @ full.T - np.eye(n))
    if residual > 1e-10:
        raise ValueError(f"completion failed: orthogonality residual {residual:.3e}")
    return full


def block_embedding_equivalence(frame, y, x):
    """Residual between the dense block rotation and the rank-r update.

    Builds U = P^T blockdiag(Y, I) P from a completed frame and compares
    U X against X + P(r)^T (Y - I) P(r) X.  Ties the implemented update to
    its n x n definition; should vanish to roundoff.
    """
    if frame.n > 64:
        raise ValueError(f"dense assembly is limited to n <= 64, got n={frame.n}")
    xd = as_matrix(x)
    y = np.asarray(y, dtype=float)
    if y.shape != (frame.r, frame.r):
        raise ValueError(f"rotation must be {frame.r} x {frame.r}, got {y.shape}")
    p_full = complete_frame(frame)
    block = np.eye(frame.n)
    block[: frame.r, : frame.r] = y
    embedded = p_full.T @ block @ p_full
    direct = apply_submanifold_rotation(frame, y, xd)
    return float(np.linalg.norm(embedded @ xd - direct))
