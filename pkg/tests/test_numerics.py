import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmsdr.errors import DimensionError, InvalidInput, RankError
from pmsdr.numerics import (as_data_matrix, cosine_similarity, least_squares_projection,
                            normalize_columns, orthonormality_error, pinv, principal_angles,
                            truncated_svd)


def test_svd_identity():
    _, s, _ = truncated_svd(np.eye(3), 3)
    np.testing.assert_allclose(s, 1.0)


def test_svd_rank_deficient(rng):
    a, b, c, d = (rng.standard_normal(6) for _ in range(4))
    _, s, _ = truncated_svd(np.outer(a, b) + np.outer(c, d), 3)
    assert s[2] <= 1e-10


def test_svd_reconstruction_matches_tail_energy(rng):
    A = rng.standard_normal((50, 120))
    U, s, V = truncated_svd(A, 5)
    full = np.linalg.svd(A, compute_uv=False)
    err = np.linalg.norm(A - (U * s) @ V.T)
    assert abs(err - np.sqrt(np.sum(full[5:] ** 2))) <= 1e-8


def test_svd_rejects_bad_rank():
    with pytest.raises(RankError):
        truncated_svd(np.ones((3, 2)), 3)
    with pytest.raises(RankError):
        truncated_svd(np.ones((3, 2)), 0)


def test_svd_deterministic(rng):
    A = rng.standard_normal((8, 6))
    a, b = truncated_svd(A, 3), truncated_svd(A, 3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_projection_in_and_orthogonal(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
    B, w = Q[:, :3], Q[:, 3]
    v = B @ np.array([1.0, -2.0, 0.5])
    assert np.max(np.abs(least_squares_projection(B, v)[1] - v)) <= 1e-10
    assert np.max(np.abs(least_squares_projection(B, w)[1])) <= 1e-10


def test_projection_normal_equations(rng):
    B, v = rng.standard_normal((10, 3)), rng.standard_normal(10)
    _, p = least_squares_projection(B, v)
    assert np.linalg.norm(B.T @ (v - p)) <= 1e-8


def test_projection_beats_random_candidates(rng):
    B, v = rng.standard_normal((12, 4)), rng.standard_normal(12)
    _, p = least_squares_projection(B, v)
    best = np.linalg.norm(v - p)
    for _ in range(100):
        assert best <= np.linalg.norm(v - B @ rng.standard_normal(4)) + 1e-12


def test_projection_dimension_mismatch():
    with pytest.raises(DimensionError):
        least_squares_projection(np.ones((3, 1)), np.ones(4))


def test_pinv_self_consistency(rng):
    for _ in range(10):
        B = rng.standard_normal((9, 4))
        assert np.max(np.abs(B @ pinv(B) @ B - B)) <= 1e-8


def test_pinv_cutoff_drops_tiny_singular_values():
    B = np.diag([1.0, 1e-20])
    np.testing.assert_array_equal(pinv(B), np.diag([1.0, 0.0]))


@pytest.mark.parametrize("u,v,expected", [
    ((1, 0), (1, 0), 1.0),
    ((1, 0), (0, 1), 0.0),
    ((1, 1), (1, 0), 1 / np.sqrt(2)),
])
def test_cosine(u, v, expected):
    assert cosine_similarity(u, v) == pytest.approx(expected, abs=1e-15)


def test_cosine_zero_vector_and_mismatch():
    assert cosine_similarity([0, 0], [1, 0]) == 0.0
    with pytest.raises(DimensionError):
        cosine_similarity([1, 0], [1, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_cosine_bounded(u, v):
    assert -1.0 <= cosine_similarity(u, v) <= 1.0


def test_principal_angles(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 4)))
    np.testing.assert_allclose(principal_angles(Q[:, :2], Q[:, :2]), 0.0, atol=1e-12)
    np.testing.assert_allclose(principal_angles(Q[:, :2], Q[:, 2:]), np.pi / 2, atol=1e-12)


def test_orthonormality_error(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((7, 3)))
    assert orthonormality_error(Q) <= 1e-12
    assert orthonormality_error(2 * Q) == pytest.approx(3.0)


def test_normalize_columns(rng):
    A = rng.standard_normal((5, 4))
    An, n = normalize_columns(A)
    np.testing.assert_allclose(np.linalg.norm(An, axis=0), 1.0)
    np.testing.assert_allclose(An * n, A)
    A[:, 1] = 0
    with pytest.raises(InvalidInput):
        normalize_columns(A)


def test_as_data_matrix_rejects():
    with pytest.raises(InvalidInput):
        as_data_matrix(np.ones(3))
    with pytest.raises(InvalidInput):
        as_data_matrix([[np.nan]])
