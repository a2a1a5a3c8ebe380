"""Random-walk outlier scoring and inlier/outlier splitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoGapError


@dataclass
class OutlierScores:
    """Time-averaged visit probabilities; low values flag outliers."""

    pi: np.ndarray
    walk_length: int

    def __len__(self):
        return len(self.pi)


def _scores_array(scores) -> np.ndarray:
    if isinstance(scores, OutlierScores):
        return np.asarray(scores.pi, dtype=np.float64)
    return np.asarray(scores, dtype=np.float64)


def random_walk_scores(P, T: int = 1000, atol: float = 1e-8) -> OutlierScores:
    """Cesaro average ``(1/T) sum_{t=1..T} pi_0 P^t`` from the uniform start.

    Averaging over steps (rather than taking ``pi_0 P^T``) keeps the scores
    well defined for periodic chains.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInput("transition matrix must be square")
    if T < 1:
        raise InvalidInput(f"walk length must be >= 1, got {T}")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=atol):
        raise InvalidInput("transition matrix is not row-stochastic")
    N = P.shape[0]
    pi = np.full(N, 1.0 / N)
    acc = np.zeros(N)
    for _ in range(T):
        pi = pi @ P
        acc += pi
    acc /= T
    return OutlierScores(acc / acc.sum(), int(T))


def split_by_known_ratio(scores, outlier_count: int):
    """Flag the ``outlier_count`` lowest-scoring columns (ties go to the lower index)."""
    s = _scores_array(scores)
    N = s.size
    if not 0 <= outlier_count < N:
        raise InvalidInput(f"outlier_count must lie in [0, {N}), got {outlier_count}")
    order = np.lexsort((np.arange(N), s))
    outliers = np.zeros(N, dtype=bool)
    outliers[order[:outlier_count]] = True
    return ~outliers, outliers


def split_by_gap(scores):
    """Split at the widest gap between consecutive sorted scores.

    Everything below the gap is an outlier.
    """
    s = _scores_array(scores)
    if s.size < 2:
        raise InvalidInput("need at least two scores")
    order = np.lexsort((np.arange(s.size), s))
    gaps = np.diff(s[order])
    k = int(np.argmax(gaps))
    if gaps[k] <= 0:
        raise NoGapError("all scores are equal")
    outliers = np.zeros(s.size, dtype=bool)
    outliers[order[:k + 1]] = True
    return ~outliers, outliers
