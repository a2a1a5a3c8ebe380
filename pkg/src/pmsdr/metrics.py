"""Evaluation metrics, cluster-label alignment and sweep aggregation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateError, DimensionError, InvalidInput

METRIC_NAMES = ("ce_gt", "ce_recon", "re_gt", "re_recon", "uoratio", "scerr")


def _ratio(num: int, den: int):
    """``num / den`` with an empty denominator mapped to ``(0.0, True)``."""
    if den == 0:
        return 0.0, True
    return float(num) / float(den), False


def align_labels(pred, truth, L: int | None = None):
    """Relabeling of ``pred`` that best agrees with ``truth``.

    Solves the assignment problem on the confusion matrix. Returns
    ``(mapping, agreement)`` where ``mapping[p]`` is the truth label matched
    to predicted label ``p`` and ``agreement`` is the matched fraction.
    Predicted labels left unmatched (more predicted than true groups) map
    to -1.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise DimensionError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size and (pred.min() < 0 or truth.min() < 0):
        raise InvalidInput("labels must be non-negative")
    n_pred = int(pred.max()) + 1 if pred.size else 0
    n_true = int(truth.max()) + 1 if truth.size else 0
    if L is not None:
        n_pred, n_true = max(n_pred, L), max(n_true, L)
    conf = np.zeros((n_pred, n_true), dtype=np.int64)
    np.add.at(conf, (pred, truth), 1)
    rows, cols = linear_sum_assignment(-conf)
    mapping = np.full(n_pred, -1, dtype=np.int64)
    mapping[rows] = cols
    agreement = conf[rows, cols].sum() / pred.size if pred.size else 1.0
    return mapping, float(agreement)


def misclassification_rate(pred, truth, mapping=None):
    """Fraction of entries where (mapped) ``pred`` differs from ``truth``.

    Returns ``(rate, degenerate)``; an empty input is degenerate with rate 0.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise DimensionError(f"length mismatch: {pred.size} vs {truth.size}")
    if mapping is not None and pred.size:
        pred = np.asarray(mapping)[pred]
    return _ratio(int(np.sum(pred != truth)), pred.size)


def classification_errors(gt_pred, true_outlier_labels, recon_pred, detected_truth, mapping=None):
    """Outlier classification errors with ground-truth and reconstructed models.

    Parameters
    ----------
    gt_pred, true_outlier_labels : array of int
        Labels assigned to the true outliers using the ground-truth bases,
        and their true groups.
    recon_pred, detected_truth : array of int
        Cluster indices assigned to the detected outliers using the
        estimated models, and the true groups of those columns.
    mapping : array of int, optional
        Cluster-to-group map from :func:`align_labels`.

    Returns
    -------
    (ce_gt, ce_recon), flags
    """
    ce_gt, d_gt = misclassification_rate(gt_pred, true_outlier_labels)
    ce_recon, d_recon = misclassification_rate(recon_pred, detected_truth, mapping)
    return (ce_gt, ce_recon), {"ce_gt": d_gt, "ce_recon": d_recon}


def recovery_error(Y_hat, Y, bases, labels) -> float:
    """``||Proj_S(Y_hat) - Y||_F / ||Y||_F`` with the projection taken per column.

    Column ``j`` is projected onto ``span(bases[labels[j]])``.
    """
    Y_hat = np.atleast_2d(np.asarray(Y_hat, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y_hat.shape != Y.shape:
        raise DimensionError(f"shape mismatch: {Y_hat.shape} vs {Y.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (Y.shape[1],):
        raise DimensionError("need one label per column")
    denom = np.linalg.norm(Y)
    if denom == 0.0:
        raise DegenerateError("reference matrix has zero Frobenius norm")
    proj = np.empty_like(Y_hat)
    for k in np.unique(labels):
        cols = labels == k
        U = np.asarray(getattr(bases[k], "basis", bases[k]), dtype=np.float64)
        proj[:, cols] = U @ (U.T @ Y_hat[:, cols])
    return float(np.linalg.norm(proj - Y) / denom)


def recovery_errors(Y_hat_gt, Y_hat_recon, Y, gt_bases, labels):
    """``(re_gt, re_recon)`` for recoveries made with true and estimated models."""
    return (recovery_error(Y_hat_gt, Y, gt_bases, labels),
            recovery_error(Y_hat_recon, Y, gt_bases, labels))


def auxiliary_metrics(detected_outliers, true_outliers, inlier_pred=None, inlier_truth=None,
                      mapping=None):
    """Undetected-outlier ratio and clustering error on detected inliers.

    Returns ``(uoratio, scerr), flags``. ``inlier_pred`` and ``inlier_truth``
    hold cluster indices and true groups of the detected inliers; the
    clustering is aligned with :func:`align_labels` unless ``mapping`` is given.
    """
    det = np.asarray(detected_outliers, dtype=bool)
    true = np.asarray(true_outliers, dtype=bool)
    if det.shape != true.shape:
        raise DimensionError("masks must have the same length")
    uoratio, d_uo = _ratio(int(np.sum(true & ~det)), int(true.sum()))
    if inlier_pred is None:
        return (uoratio, 0.0), {"uoratio": d_uo, "scerr": True}
    if mapping is None and len(inlier_pred):
        mapping, _ = align_labels(inlier_pred, inlier_truth)
    scerr, d_sc = misclassification_rate(inlier_pred, inlier_truth, mapping)
    return (uoratio, scerr), {"uoratio": d_uo, "scerr": d_sc}


def permutation_error_ratio(phi_hat, phi) -> float:
    """Fraction of coordinates where two permutations disagree."""
    a = np.asarray(getattr(phi_hat, "phi", phi_hat))
    b = np.asarray(getattr(phi, "phi", phi))
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.mean(a != b)) if a.size else 0.0


@dataclass
class EvaluationReport:
    """Metrics of one pipeline run.

    Ground-truth-dependent metrics are None when no ground truth is
    available. ``degenerate`` flags metrics whose denominator was empty.
    """

    ce_gt: float | None = None
    ce_recon: float | None = None
    re_gt: float | None = None
    re_recon: float | None = None
    uoratio: float | None = None
    scerr: float | None = None
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int | None = None
    degenerate: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in METRIC_NAMES:
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0:
                raise InvalidInput(f"{name} = {v} is not a finite non-negative number")
            if not name.startswith("re_") and v > 1:
                raise InvalidInput(f"{name} = {v} exceeds 1")

    def metrics(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_NAMES}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


AGGREGATES = ("median", "mean", "std", "min", "max")


def aggregate(values) -> dict:
    """Median, mean, std, min and max over the finite entries of ``values``."""
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {a: float("nan") for a in AGGREGATES}
    return {"median": float(np.median(v)), "mean": float(v.mean()), "std": float(v.std()),
            "min": float(v.min()), "max": float(v.max())}
