"""Recovery of classified outlier columns by elimination-based least squares."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import build_schedule, eliminate
from .errors import DimensionError, RecoveryError, ScheduleError
from .numerics import pinv


@dataclass
class RecoveredColumn:
    """Reconstruction ``y_hat = basis @ coeffs`` fitted on the ``retained`` rows."""

    y_hat: np.ndarray
    coeffs: np.ndarray
    retained: np.ndarray
    subspace: int


def _basis(model):
    return np.asarray(getattr(model, "basis", model), dtype=np.float64)


def recover_outlier(y, model, gamma_retain: float = 0.5, max_iter: int = 10) -> RecoveredColumn:
    """Fit ``y`` on the rows of ``model`` that survive residual elimination.

    The rows most inconsistent with the subspace are dropped with the same
    schedule used for classification; the coefficients come from the
    remaining rows and the full-length column is rebuilt from them.
    """
    y = np.asarray(y, dtype=np.float64)
    U = _basis(model)
    if U.shape[0] != y.size:
        raise DimensionError(f"basis has {U.shape[0]} rows, column has {y.size}")
    r = U.shape[1]
    try:
        schedule = build_schedule(y.size, r, gamma_retain, max_iter)
        res = eliminate(y, U, schedule)
    except ScheduleError as exc:
        raise RecoveryError(str(exc)) from exc
    A = res.retained
    if A.size < r + 1:
        raise RecoveryError(f"only {A.size} rows retained, need >= {r + 1}")
    coeffs = pinv(U[A]) @ y[A]
    group = getattr(model, "group", -1)
    return RecoveredColumn(U @ coeffs, coeffs, A, int(group))


def recover_matrix(G, outlier_mask, labels, models, gamma_retain: float = 0.5,
                   max_iter: int = 10) -> np.ndarray:
    """Copy of ``G`` with every outlier column replaced by its recovery.

    ``labels[j]`` indexes ``models`` for each outlier column ``j``; entries
    for inlier columns are ignored. Column order is preserved.
    """
    G = np.asarray(G, dtype=np.float64)
    mask = np.asarray(outlier_mask, dtype=bool)
    labels = np.asarray(labels)
    if mask.shape != (G.shape[1],) or labels.shape != (G.shape[1],):
        raise DimensionError("mask and labels must have one entry per column")
    out = G.copy()
    failed = []
    for j in np.flatnonzero(mask):
        try:
            out[:, j] = recover_outlier(G[:, j], models[int(labels[j])],
                                        gamma_retain, max_iter).y_hat
        except RecoveryError:
            failed.append(int(j))
    if failed:
        raise RecoveryError(f"{len(failed)} column(s) could not be recovered: {failed[:10]}", failed)
    return out

