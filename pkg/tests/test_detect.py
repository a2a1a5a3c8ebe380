import numpy as np
import pytest

from pmsdr.detect import OutlierScores, random_walk_scores, split_by_gap, split_by_known_ratio
from pmsdr.errors import InvalidInput, NoGapError
from pmsdr.pipeline import PipelineConfig, run_pipeline
from pmsdr.selfrep import transition_matrix
from pmsdr.synth import SynthConfig, build_dataset


def test_identity_chain_stays_uniform():
    np.testing.assert_allclose(random_walk_scores(np.eye(5)).pi, 0.2)


def test_periodic_chain():
    s = random_walk_scores([[0, 1], [1, 0]], T=1000)
    np.testing.assert_allclose(s.pi, 0.5)


def brute_force_cesaro(P, T):
    N = P.shape[0]
    pi = np.full(N, 1 / N)
    out = np.zeros(N)
    Pt = np.eye(N)
    for _ in range(T):
        Pt = Pt @ P
        out += pi @ Pt
    return out / T


def test_inliers_outscore_outliers():
    rng = np.random.default_rng(0)
    n_in, n_out = 8, 4
    N = n_in + n_out
    W = np.zeros((N, N))
    W[:n_in, :n_in] = rng.random((n_in, n_in)) + 0.5
    W[n_in:, :n_in] = rng.random((n_out, n_in))
    W[:n_in, n_in:] = 1e-3
    np.fill_diagonal(W, 0)
    P = W / W.sum(axis=1, keepdims=True)
    s = random_walk_scores(P, 1000)
    np.testing.assert_allclose(s.pi, brute_force_cesaro(P, 1000), atol=1e-12)
    assert s.pi[:n_in].min() > s.pi[n_in:].max()


def test_relabeling_equivariance(rng):
    P = rng.random((6, 6))
    P /= P.sum(axis=1, keepdims=True)
    perm = rng.permutation(6)
    a = random_walk_scores(P).pi
    b = random_walk_scores(P[np.ix_(perm, perm)]).pi
    np.testing.assert_allclose(b, a[perm], atol=1e-12)


def test_rejects_non_stochastic():
    with pytest.raises(InvalidInput):
        random_walk_scores(np.ones((2, 2)))
    with pytest.raises(InvalidInput):
        random_walk_scores(np.eye(2), T=0)


def test_known_ratio_split():
    inl, out = split_by_known_ratio([0.1, 0.4, 0.1, 0.4], 2)
    np.testing.assert_array_equal(np.flatnonzero(out), [0, 2])
    np.testing.assert_array_equal(inl, ~out)
    _, out = split_by_known_ratio(OutlierScores(np.ones(3) / 3, 1), 0)
    assert not out.any()
    _, out = split_by_known_ratio([0.2, 0.2, 0.2], 1)
    np.testing.assert_array_equal(np.flatnonzero(out), [0])


def test_gap_split():
    _, out = split_by_gap([0.01, 0.02, 0.3, 0.31])
    np.testing.assert_array_equal(out, [True, True, False, False])
    with pytest.raises(NoGapError):
        split_by_gap([0.5, 0.5])


def test_gap_split_bimodal(rng):
    a = rng.normal(0.0, 1.0, 30)
    b = rng.normal(20.0, 1.0, 50)
    _, out = split_by_gap(np.concatenate([b, a]))
    np.testing.assert_array_equal(out, np.r_[np.zeros(50, bool), np.ones(30, bool)])


@pytest.mark.slow
def test_detection_quality_and_cesaro_stability():
    cfg = SynthConfig(M=50, L=3, r=3, shuffle_ratio=0.4, outlier_ratio=0.2,
                      samples_per_group=60, snr_db=None)
    ratios = []
    for seed in range(20):
        b = build_dataset(cfg, seed)
        run = run_pipeline(b.corrupted, PipelineConfig(L=3, r=3, n_out=int(b.outlier_mask.sum())))
        ratios.append(np.mean(~run.outlier_mask[b.outlier_mask]))
        if seed < 3:
            P = transition_matrix(run.R)
            d = np.abs(random_walk_scores(P, 2000).pi - random_walk_scores(P, 1000).pi).sum()
            assert d <= 0.01
    assert np.median(ratios) <= 0.15
