"""Frame sampling, application, and truncated-permutation enumeration."""

import numpy as np
import pytest

from rsdm.frames import (
    ENUMERATION_LIMIT,
    Frame,
    SamplerKind,
    enumerate_truncated_permutations,
    frame_apply,
    frame_apply_transpose,
    sample_frame,
    sample_haar_frame,
    sample_permutation_frame,
    truncated_permutation_count,
)


def test_haar_frame_rows_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = sample_haar_frame(12, 5, rng)
        gram = f.rows @ f.rows.T
        assert np.linalg.norm(gram - np.eye(5)) <= 1e-12


def test_haar_frame_square_is_orthogonal():
    rng = np.random.default_rng(1)
    f = sample_haar_frame(7, 7, rng)
    assert abs(abs(np.linalg.det(f.rows)) - 1.0) <= 1e-10


def test_haar_frame_entry_second_moment():
    # first-entry second moment of a Haar frame row is 1/n
    rng = np.random.default_rng(2)
    trials = 100000
    samples = np.empty(trials)
    for i in range(trials):
        samples[i] = sample_haar_frame(10, 3, rng).rows[0, 0] ** 2
    est = samples.mean()
    se = samples.std(ddof=1) / np.sqrt(trials)
    assert abs(est - 0.1) <= 3.0 * se


def test_permutation_frame_indices_valid():
    rng = np.random.default_rng(3)
    for _ in range(200):
        f = sample_permutation_frame(9, 4, rng)
        assert len(set(f.indices.tolist())) == 4
        assert f.indices.min() >= 0 and f.indices.max() < 9
        assert f.is_permutation


def test_permutation_frame_deterministic():
    a = sample_permutation_frame(15, 6, np.random.default_rng(77))
    b = sample_permutation_frame(15, 6, np.random.default_rng(77))
    assert np.array_equal(a.indices, b.indices)


def test_permutation_frame_uniform_over_ordered_pairs():
    # n=3, r=2: six ordered pairs, each with probability 1/6
    rng = np.random.default_rng(4)
    trials = 60000
    counts = {}
    for _ in range(trials):
        f = sample_permutation_frame(3, 2, rng)
        key = tuple(f.indices.tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    se = np.sqrt((1 / 6) * (5 / 6) / trials)
    for key, c in counts.items():
        assert abs(c / trials - 1 / 6) <= 3.0 * se, f"pair {key}: {c / trials}"


def test_frame_apply_gather_semantics():
    f = Frame(3, indices=np.array([2, 0]))
    m = np.arange(12.0).reshape(3, 4)
    out = frame_apply(f, m)
    assert np.array_equal(out, m[[2, 0]])


def test_frame_apply_dense_matches_triple_loop():
    rng = np.random.default_rng(5)
    f = sample_haar_frame(6, 3, rng)
    m = rng.standard_normal((6, 4))
    out = frame_apply(f, m)
    oracle = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            for k in range(6):
                oracle[i, j] += f.rows[i, k] * m[k, j]
    assert np.max(np.abs(out - oracle)) <= 1e-12


def test_frame_apply_permutation_equals_dense_materialization():
    rng = np.random.default_rng(6)
    f = sample_permutation_frame(8, 3, rng)
    m = rng.standard_normal((8, 5))
    gathered = frame_apply(f, m)
    via_dense = f.as_dense() @ m
    # 0/1 rows select entries without arithmetic error
    assert np.array_equal(gathered, via_dense)


def test_frame_apply_transpose_scatter_semantics():
    f = Frame(3, indices=np.array([2, 0]))
    n = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = frame_apply_transpose(f, n)
    assert np.array_equal(out, np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 2.0]]))


def test_frame_apply_round_trip():
    rng = np.random.default_rng(7)
    for f in (sample_permutation_frame(10, 4, rng), sample_haar_frame(10, 4, rng)):
        n = rng.standard_normal((4, 6))
        back = frame_apply(f, frame_apply_transpose(f, n))
        tol = 0.0 if f.is_permutation else 1e-12
        assert np.max(np.abs(back - n)) <= tol


def test_frame_apply_transpose_dense_oracle():
    rng = np.random.default_rng(8)
    f = sample_haar_frame(7, 3, rng)
    n = rng.standard_normal((3, 2))
    out = frame_apply_transpose(f, n)
    assert np.max(np.abs(out - f.rows.T @ n)) <= 1e-12


def test_truncated_permutation_count():
    assert truncated_permutation_count(3, 3) == 6
    assert truncated_permutation_count(5, 2) == 20
    assert truncated_permutation_count(10, 4) == 10 * 9 * 8 * 7


def test_enumerate_full_permutations_of_three():
    frames = list(enumerate_truncated_permutations(3, 3))
    assert len(frames) == 6
    seen = {tuple(f.indices.tolist()) for f in frames}
    assert len(seen) == 6
    for f in frames:
        assert sorted(f.indices.tolist()) == [0, 1, 2]


def test_enumerate_is_lexicographic_and_complete():
    frames = [tuple(f.indices.tolist()) for f in enumerate_truncated_permutations(4, 2)]
    assert len(frames) == 12
    assert frames == sorted(frames)
    assert frames[0] == (0, 1) and frames[-1] == (3, 2)


def test_enumerate_refuses_beyond_limit():
    with pytest.raises(ValueError) as exc:
        list(enumerate_truncated_permutations(30, 12, limit=1000))
    assert str(truncated_permutation_count(30, 12)) in str(exc.value)
    assert ENUMERATION_LIMIT >= 10 ** 6


def test_sample_frame_dispatch():
    rng = np.random.default_rng(9)
    f = sample_frame(SamplerKind.HAAR_ORTHOGONAL, 8, 3, rng)
    assert f.rows is not None and not f.is_permutation
    g = sample_frame(SamplerKind.UNIFORM_PERMUTATION, 8, 3, rng)
    assert g.is_permutation
    with pytest.raises(ValueError):
        sample_frame(SamplerKind.EXHAUSTIVE_PERMUTATION, 8, 3, rng)


def test_frame_validation():
    with pytest.raises(ValueError):
        Frame(4, indices=np.array([1, 1]))  # duplicate rows
    with pytest.raises(ValueError):
        Frame(4, indices=np.array([0, 4]))  # out of range
    with pytest.raises(ValueError):
        Frame(4)  # neither representation
    with pytest.raises(ValueError):
        Frame(4, rows=np.ones((5, 4)))  # r > n


def test_frame_as_dense_permutation():
    f = Frame(4, indices=np.array([3, 1]))
    dense = f.as_dense()
    assert dense.shape == (2, 4)
    assert np.array_equal(dense, np.eye(4)[[3, 1]])
    assert f.r == 2 and f.n == 4
