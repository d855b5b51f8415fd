"""Random row frames P(r): the first r rows of an n x n orthogonal matrix.

Only those r rows are ever stored.  Two distributions are supported, dense
Haar-orthonormal rows and uniformly random permutation rows, plus an
exhaustive generator over all ordered r-subsets for the deterministic-sweep
solver.  Permutation frames apply as pure gathers and scatters, never as a
matrix product.
"""

import enum
import itertools
import math

import numpy as np

from .manifold import as_matrix, qr_orthonormalize

# n!/(n-r)! grows fast; refuse to enumerate beyond this many frames.
ENUMERATION_LIMIT = 10**6


class SamplerKind(enum.Enum):
    HAAR_ORTHOGONAL = "haar"
    UNIFORM_PERMUTATION = "permutation"
    EXHAUSTIVE_PERMUTATION = "exhaustive"


class Frame:
    """Either r dense orthonormal rows, or r row indices of a permutation.

    Attributes
    ----------
    n, r : int
    rows : (r, n) array for the dense variant, else None
    indices : (r,) int array for the permutation variant, else None
    """

    __slots__ = ("n", "r", "rows", "indices")

    def __init__(self, n, rows=None, indices=None):
        if (rows is None) == (indices is None):
            raise ValueError("exactly one of rows/indices must be given")
        self.n = int(n)
        if rows is not None:
            rows = np.asarray(rows, dtype=float)
            if rows.ndim != 2 or rows.shape[1] != self.n:
                raise ValueError(f"rows must be r x {self.n}, got {rows.shape}")
            self.r = rows.shape[0]
            self.rows = rows
            self.indices = None
        else:
            indices = np.asarray(indices, dtype=np.intp)
            if indices.ndim != 1:
                raise ValueError("indices must be a flat list")
            if len(set(indices.tolist())) != indices.size:
                raise ValueError("indices must be distinct")
            if indices.size and (indices.min() < 0 or indices.max() >= self.n):
                raise ValueError(f"indices out of range [0, {self.n})")
            self.r = indices.size
            self.rows = None
            self.indices = indices
        if not 1 <= self.r <= self.n:
            raise ValueError(f"need 1 <= r <= n, got r={self.r}, n={self.n}")

    @property
    def is_permutation(self):
        return self.indices is not None

    def as_dense(self):
        """Materialize the r x n row matrix (0/1 rows for permutations)."""
        if self.rows is not None:
            return self.rows.copy()
        out = np.zeros((self.r, self.n))
        out[np.arange(self.r), self.indices] = 1.0
        return out

    def __repr__(self):
        tag = "permutation" if self.is_permutation else "dense"
        return f"Frame({tag}, n={self.n}, r={self.r})"


def sample_haar_frame(n, r, rng):
    """Draw r Haar-distributed orthonormal rows in R^n.

    Transposed Q factor of an n x r Gaussian matrix; the diag(R) > 0 sign fix
    pins the distribution to the invariant one.
    """
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    return Frame(n, rows=qr_orthonormalize(rng.standard_normal((n, r))).T)


def sample_permutation_frame(n, r, rng):
    """Draw r distinct row indices, uniform over ordered r-subsets of [0, n)."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    return Frame(n, indices=rng.permutation(n)[:r])


def sample_frame(kind, n, r, rng):
    """Dispatch on SamplerKind for the two random samplers."""
    if not isinstance(kind, SamplerKind):
        kind = SamplerKind(kind)
    if kind is SamplerKind.HAAR_ORTHOGONAL:
        return sample_haar_frame(n, r, rng)
    if kind is SamplerKind.UNIFORM_PERMUTATION:
        return sample_permutation_frame(n, r, rng)
    raise ValueError(f"{kind.value} is not a per-iteration sampler")


def frame_apply(frame, m):
    """Compute P(r) M for an n-row matrix M.

    Permutation frames gather rows (bitwise copies); dense frames multiply.
    """
    md = as_matrix(m)
    if md.shape[0] != frame.n:
        raise ValueError(f"matrix has {md.shape[0]} rows, frame expects {frame.n}")
    if frame.is_permutation:
        return md[frame.indices]
    return frame.rows @ md


def frame_apply_transpose(frame, m):
    """Compute P(r)^T M for an r-row matrix M (scatter for permutations)."""
    md = as_matrix(m)
    if md.shape[0] != frame.r:
        raise ValueError(f"matrix has {md.shape[0]} rows, frame expects {frame.r}")
    if frame.is_permutation:
        out = np.zeros((frame.n,) + md.shape[1:])
        out[frame.indices] = md
        return out
    return frame.rows.T @ md


def truncated_permutation_count(n, r):
    """Number of ordered r-subsets of [0, n), n!/(n-r)!."""
    return math.perm(n, r)


def enumerate_truncated_permutations(n, r, limit=ENUMERATION_LIMIT):
    """Yield every ordered r-tuple of distinct indices, lexicographically.

    Refuses when the count n!/(n-r)! exceeds `limit`.
    """
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    count = truncated_permutation_count(n, r)
    if count > limit:
        raise ValueError(
            f"enumeration of {count} ordered {r}-subsets of [0, {n}) exceeds "
            f"the limit of {limit}"
        )
    for combo in itertools.permutations(range(n), r):
        yield Frame(n, indices=np.array(combo, dtype=np.intp))
