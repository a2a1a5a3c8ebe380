import itertools
import json

import numpy as np
import pytest

from pmsdr.errors import DegenerateError, DimensionError, InvalidInput
from pmsdr.metrics import (EvaluationReport, aggregate, align_labels, auxiliary_metrics,
                           classification_errors, misclassification_rate,
                           permutation_error_ratio, recovery_error, recovery_errors)
from pmsdr.synth import PartialPermutation, generate_basis, make_partial_permutation, sample_points


def test_align_identity_and_swap():
    t = np.array([0, 0, 1, 1, 2])
    m, a = align_labels(t, t)
    np.testing.assert_array_equal(m, [0, 1, 2])
    assert a == 1.0
    m, a = align_labels(np.array([1, 1, 0, 0, 2]), t)
    np.testing.assert_array_equal(m, [1, 0, 2])
    assert a == 1.0


def test_align_matches_brute_force(rng):
    for _ in range(20):
        pred, truth = rng.integers(0, 3, 40), rng.integers(0, 3, 40)
        best = max(np.mean(np.array(p)[pred] == truth) for p in itertools.permutations(range(3)))
        assert align_labels(pred, truth, 3)[1] == pytest.approx(best)


def test_align_length_mismatch():
    with pytest.raises(DimensionError):
        align_labels([0, 1], [0])
    with pytest.raises(InvalidInput):
        align_labels([-1], [0])


def test_classification_errors():
    (ce_gt, ce_recon), flags = classification_errors([0, 1], [0, 1], [1, 0], [0, 1], np.array([1, 0]))
    assert (ce_gt, ce_recon) == (0.0, 0.0) and not any(flags.values())
    (ce_gt, _), _ = classification_errors([0, 1, 1, 2], [0, 1, 2, 2], [], [])
    assert ce_gt == 0.25
    (_, ce_recon), flags = classification_errors([0], [0], [], [])
    assert ce_recon == 0.0 and flags["ce_recon"]


def test_relabel_invariance(rng):
    truth = rng.integers(0, 3, 50)
    pred = truth.copy()
    pred[:10] = rng.integers(0, 3, 10)
    perm = np.array([2, 0, 1])
    a = misclassification_rate(pred, truth, align_labels(pred, truth)[0])[0]
    b = misclassification_rate(perm[pred], truth, align_labels(perm[pred], truth)[0])[0]
    assert a == b


def test_column_permutation_invariance(rng):
    U = [generate_basis(20, 2, k) for k in range(2)]
    labels = np.array([0, 1] * 5)
    Y = np.column_stack([sample_points(U[k], 1, j)[:, 0] for j, k in enumerate(labels)])
    Y_hat = Y + 0.1 * rng.standard_normal(Y.shape)
    p = rng.permutation(10)
    assert recovery_error(Y_hat[:, p], Y[:, p], U, labels[p]) == pytest.approx(
        recovery_error(Y_hat, Y, U, labels), abs=1e-14)
    det, true = rng.random(10) < 0.5, rng.random(10) < 0.5
    assert auxiliary_metrics(det[p], true[p])[0] == auxiliary_metrics(det, true)[0]


def test_recovery_error_cases(rng):
    U = [generate_basis(20, 3, 0)]
    Y = sample_points(U[0], 6, 1)
    labels = np.zeros(6, int)
    assert recovery_error(Y, Y, U, labels) <= 1e-14
    assert recovery_error(np.zeros_like(Y), Y, U, labels) == 1.0
    delta = U[0] @ rng.standard_normal((3, 6))
    expected = np.linalg.norm(delta) / np.linalg.norm(Y)
    assert abs(recovery_error(Y + delta, Y, U, labels) - expected) <= 1e-10
    assert recovery_errors(Y, Y + delta, Y, U, labels)[0] <= 1e-14
    with pytest.raises(DegenerateError):
        recovery_error(Y, np.zeros_like(Y), U, labels)


def test_auxiliary_metrics():
    true = np.zeros(20, bool)
    true[:10] = True
    det = true.copy()
    det[0] = False
    (uo, sc), _ = auxiliary_metrics(det, true, [0, 0, 1, 1], [1, 1, 0, 0])
    assert uo == pytest.approx(0.1) and sc == 0.0
    (uo, sc), _ = auxiliary_metrics(true, true, [0, 1], [0, 1])
    assert (uo, sc) == (0.0, 0.0)


def test_scerr_recount(small_bundle):
    rng = np.random.default_rng(3)
    truth = small_bundle.labels
    pred = np.where(rng.random(truth.size) < 0.1, 1 - truth, truth)
    (_, sc), _ = auxiliary_metrics(np.zeros(truth.size, bool), np.zeros(truth.size, bool),
                                   1 - pred, truth)
    conf = np.zeros((2, 2), int)
    for p, t in zip(1 - pred, truth):
        conf[p, t] += 1
    recount = 1 - max(conf[0, 0] + conf[1, 1], conf[0, 1] + conf[1, 0]) / truth.size
    assert sc == pytest.approx(recount)


def test_permutation_error_ratio(rng):
    p = make_partial_permutation(20, 0.5, rng_seed=1)
    assert permutation_error_ratio(p, p) == 0.0
    full = PartialPermutation.from_phi(np.roll(np.arange(10), 1))
    assert permutation_error_ratio(PartialPermutation.identity(10), full) == 1.0
    a, b = rng.permutation(20), rng.permutation(20)
    assert permutation_error_ratio(a, b) == np.sum(a != b) / 20
    with pytest.raises(DimensionError):
        permutation_error_ratio(np.arange(3), np.arange(4))


def test_report_roundtrip_and_validation():
    rep = EvaluationReport(ce_gt=0.1, re_recon=1.5, timings={"a": 0.1}, seed=3,
                           details={"x": np.arange(2)})
    rep.validate()
    back = EvaluationReport.from_dict(json.loads(rep.to_json()))
    assert back.ce_gt == 0.1 and back.details["x"] == [0, 1]
    with pytest.raises(InvalidInput):
        EvaluationReport(ce_gt=1.5).validate()
    with pytest.raises(InvalidInput):
        EvaluationReport(re_gt=float("nan")).validate()


def test_aggregate():
    agg = aggregate([1.0, 2.0, None, float("nan"), 6.0])
    assert agg == {"median": 2.0, "mean": 3.0, "std": pytest.approx(np.std([1, 2, 6])),
                   "min": 1.0, "max": 6.0}
    assert np.isnan(aggregate([])["median"])
