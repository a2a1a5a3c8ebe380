import numpy as np
import pytest

from pmsdr.cluster import SubspaceModel
from pmsdr.errors import DimensionError, RecoveryError
from pmsdr.recover import recover_matrix, recover_outlier
from pmsdr.synth import SynthConfig, build_dataset, generate_basis, make_partial_permutation, sample_points


def test_clean_column_is_reproduced():
    U = generate_basis(40, 4, 0)
    y = sample_points(U, 1, 1)[:, 0]
    rec = recover_outlier(y, SubspaceModel(U, 3, 0))
    assert np.max(np.abs(rec.y_hat - y)) <= 1e-8
    assert rec.subspace == 3
    np.testing.assert_allclose(U @ rec.coeffs, rec.y_hat)


def test_shuffled_recovery_rate():
    good = 0
    for t in range(200):
        U = generate_basis(50, 3, [t, 0])
        y = sample_points(U, 1, [t, 1])[:, 0]
        y_t = make_partial_permutation(50, 0.2, rng_seed=[t, 2]).apply(y)
        rec = recover_outlier(y_t, U)
        good += np.linalg.norm(rec.y_hat - y) / np.linalg.norm(y) <= 1e-6
        assert np.linalg.norm(rec.y_hat - U @ (U.T @ rec.y_hat)) <= 1e-10
    assert good >= 180


def test_recovery_errors():
    with pytest.raises(DimensionError):
        recover_outlier(np.ones(5), np.ones((4, 1)))
    with pytest.raises(RecoveryError):
        recover_outlier(np.ones(3), np.ones((3, 3)))


def test_matrix_without_outliers_is_unchanged(small_bundle):
    G = small_bundle.corrupted
    N = G.shape[1]
    out = recover_matrix(G, np.zeros(N, bool), np.zeros(N, int), small_bundle.bases)
    np.testing.assert_array_equal(out, G)


def test_matrix_preserves_inlier_columns(small_bundle):
    b = small_bundle
    out = recover_matrix(b.corrupted, b.outlier_mask, b.labels, b.bases)
    np.testing.assert_array_equal(out[:, ~b.outlier_mask], b.corrupted[:, ~b.outlier_mask])


def test_all_outlier_easy_regime():
    errs = []
    cfg = SynthConfig(M=50, r=3, L=1, samples_per_group=20, outlier_ratio=0.0, snr_db=None)
    for seed in range(20):
        b = build_dataset(cfg, seed)
        Y = b.clean
        Yt = np.column_stack([make_partial_permutation(50, 0.2, rng_seed=[seed, j]).apply(Y[:, j])
                              for j in range(Y.shape[1])])
        out = recover_matrix(Yt, np.ones(Y.shape[1], bool), np.zeros(Y.shape[1], int), b.bases)
        errs.append(np.linalg.norm(out - Y) / np.linalg.norm(Y))
    assert np.median(errs) <= 1e-5


def test_matrix_checks(small_bundle):
    with pytest.raises(DimensionError):
        recover_matrix(small_bundle.corrupted, [True], [0], small_bundle.bases)
