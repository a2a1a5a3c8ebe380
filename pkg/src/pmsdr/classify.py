"""Outlier classification by iterative elimination of large residual entries.

For each candidate basis, the entries of the outlier that fit the basis
worst are removed in a few rounds (``EliminationSchedule``), and the
remaining entries are compared with the correspondingly reduced basis by
cosine distance. The closest candidate wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidInput, ScheduleError
from .numerics import cosine_similarity, least_squares_projection


_ROUNDING = 8 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class EliminationSchedule:
    m: tuple
    budget: int

    def __post_init__(self):
        m = tuple(int(x) for x in self.m)
        if any(x < 1 for x in m):
            raise ScheduleError(f"removal counts must be positive: {m}")
        if any(a < b for a, b in zip(m, m[1:])):
            raise ScheduleError(f"removal counts must be non-increasing: {m}")
        if sum(m) != self.budget:
            raise ScheduleError(f"counts {m} do not sum to budget {self.budget}")
        object.__setattr__(self, "m", m)

    def __iter__(self):
        return iter(self.m)

    def __len__(self):
        return len(self.m)


def removal_budget(M: int, r: int, gamma_retain: float) -> int:
    return int(math.floor((M - r) * (1.0 - gamma_retain) + 1e-9))


def build_schedule(M: int, r: int, gamma_retain: float = 0.5, max_iter: int = 10) -> EliminationSchedule:
    """Geometric-halving removal counts summing to ``floor((M - r)(1 - gamma_retain))``.

    Each step removes ``ceil(remaining / 2)``; if ``max_iter`` steps are not
    enough the last step takes whatever remains, which keeps the counts
    non-increasing.
    """
    if M <= r:
        raise ScheduleError(f"need M > r, got M={M}, r={r}")
    if not 0.0 < gamma_retain <= 1.0:
        raise ScheduleError(f"gamma_retain must lie in (0, 1], got {gamma_retain}")
    if max_iter < 1:
        raise ScheduleError("max_iter must be >= 1")
    budget = removal_budget(M, r, gamma_retain)
    m = []
    remaining = budget
    while remaining > 0 and len(m) < max_iter - 1:
        step = -(-remaining // 2)
        m.append(step)
        remaining -= step
    if remaining > 0:
        m.append(remaining)
    return EliminationSchedule(tuple(m), budget)


@dataclass
class EliminationResult:
    nu: np.ndarray
    basis: np.ndarray
    removed: list
    retained: np.ndarray


def eliminate(nu0, B0, schedule) -> EliminationResult:
    """Remove, round by round, the entries with the largest least-squares residual.

    ``schedule`` is an :class:`EliminationSchedule` or a sequence of counts.
    Ties in residual magnitude go to the lower index; residuals at rounding
    level (relative to ``|nu|``) count as exact zeros so that they tie too.
    ``removed`` lists original coordinates in removal order.
    """
    nu = np.asarray(nu0, dtype=np.float64)
    B = np.asarray(B0, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != nu.shape[0]:
        raise DimensionError(f"basis shape {B.shape} does not match vector length {nu.shape[0]}")
    counts = [int(x) for x in schedule]
    if nu.size - sum(counts) < B.shape[1] + 1:
        raise ScheduleError(
            f"removing {sum(counts)} of {nu.size} entries leaves fewer than r + 1 = {B.shape[1] + 1}")
    idx = np.arange(nu.size)
    removed = []
    for m in counts:
        _, proj = least_squares_projection(B, nu)
        res = np.abs(nu - proj)
        res[res <= _ROUNDING * max(B.shape) * np.linalg.norm(nu)] = 0.0
        drop = np.lexsort((np.arange(nu.size), -res))[:m]
        removed.extend(idx[drop].tolist())
        keep = np.ones(nu.size, dtype=bool)
        keep[drop] = False
        nu, B, idx = nu[keep], B[keep], idx[keep]
    return EliminationResult(nu, B, removed, idx)


def subspace_distance(nu, B) -> float:
    """``1 - cos(nu, B B^+ nu)``; 1 when the projection (or ``nu``) vanishes."""
    B = np.asarray(B, dtype=np.float64)
    if not np.any(B):
        raise InvalidInput("basis is identically zero")
    _, proj = least_squares_projection(B, nu)
    if np.linalg.norm(proj) < 1e-12 or np.linalg.norm(nu) < 1e-12:
        return 1.0
    return 1.0 - cosine_similarity(nu, proj)


@dataclass
class ClassificationResult:
    label: int
    distances: np.ndarray
    retained_indices: list = field(default_factory=list)
    removed_indices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": int(self.label),
            "distances": [float(d) for d in self.distances],
            "removed_indices": [list(map(int, r)) for r in self.removed_indices],
        }


def _basis_of(model):
    return np.asarray(getattr(model, "basis", model), dtype=np.float64)


def classify_outlier(y, models, gamma_retain: float = 0.5, max_iter: int = 10) -> ClassificationResult:
    """Assign ``y`` to the candidate subspace with the smallest post-elimination distance.

    ``models`` holds :class:`~pmsdr.cluster.SubspaceModel` objects or bare
    bases; all must share the ambient dimension and rank. The label is an
    index into ``models`` (ties resolved towards the smaller index).
    """
    y = np.asarray(y, dtype=np.float64)
    bases = [_basis_of(m) for m in models]
    if not bases:
        raise InvalidInput("need at least one candidate model")
    if any(B.shape[0] != y.size for B in bases):
        raise DimensionError("all bases must match the outlier's length")
    schedules = {}
    distances = np.empty(len(bases))
    retained, removed = [], []
    for k, B in enumerate(bases):
        r = B.shape[1]
        if r not in schedules:
            schedules[r] = build_schedule(y.size, r, gamma_retain, max_iter)
        res = eliminate(y, B, schedules[r])
        distances[k] = subspace_distance(res.nu, res.basis)
        retained.append(res.retained)
        removed.append(res.removed)
    label = int(np.argmin(distances))
    return ClassificationResult(label, distances, retained, removed)
