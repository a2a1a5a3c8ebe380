"""Dense linear-algebra kernels shared by all stages.

Samples are stored as columns throughout the package: an ``(M, N)`` array
holds ``N`` samples of ambient dimension ``M``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, InvalidInput, RankError

_EPS = np.finfo(np.float64).eps


def as_data_matrix(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a finite, non-empty 2-D float64 array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInput(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return A


def truncated_svd(A, r: int):
    """Rank-``r`` truncated SVD.

    Parameters
    ----------
    A : array_like, shape (M, N)
    r : int
        Number of leading singular triplets, ``1 <= r <= min(M, N)``.

    Returns
    -------
    U_r : ndarray, shape (M, r)
    s : ndarray, shape (r,)
        Non-increasing singular values.
    V_r : ndarray, shape (N, r)
    """
    A = as_data_matrix(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise RankError(f"rank {r} outside [1, {min(A.shape)}]")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U[:, :r], s[:r], Vt[:r].T


def pinv(B) -> np.ndarray:
    """SVD pseudo-inverse with cutoff ``max(M, r) * eps * sigma_max``."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if B.size == 0:
        return np.zeros(B.shape[::-1])
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    cutoff = max(B.shape) * _EPS * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def least_squares_projection(B, v):
    """Least-squares fit of ``v`` on the columns of ``B``.

    Returns ``(coeffs, projection)`` with ``projection = B @ coeffs``.
    Rank-deficient ``B`` is handled by the pseudo-inverse cutoff.
    """
    B = np.asarray(B, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != v.shape[0]:
        raise DimensionError(f"basis has {B.shape[0]} rows, vector has {v.shape[0]}")
    if not (np.all(np.isfinite(B)) and np.all(np.isfinite(v))):
        raise InvalidInput("non-finite input to least_squares_projection")
    coeffs = pinv(B) @ v
    return coeffs, B @ coeffs


def cosine_similarity(u, v, eps: float = 1e-12) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.size} vs {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < eps or nv < eps:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def orthonormality_error(B) -> float:
    """``max |B^T B - I|`` for a basis ``B``."""
    B = np.asarray(B, dtype=np.float64)
    return float(np.max(np.abs(B.T @ B - np.eye(B.shape[1]))))


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (radians, ascending) between ``span(A)`` and ``span(B)``."""
    Qa, _ = np.linalg.qr(np.asarray(A, dtype=np.float64))
    Qb, _ = np.linalg.qr(np.asarray(B, dtype=np.float64))
    if Qa.shape[1] < Qb.shape[1]:
        Qa, Qb = Qb, Qa
    cos = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    # sines keep small angles accurate where arccos loses half the digits
    sin = np.linalg.svd(Qb - Qa @ (Qa.T @ Qb), compute_uv=False)
    return np.sort(np.arctan2(np.sort(sin), np.clip(cos, 0.0, 1.0)))


def normalize_columns(A):
    """Scale columns to unit l2 norm; returns ``(normalized, norms)``.

    Zero columns are rejected because they have no direction.
    """
    A = as_data_matrix(A)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0.0):
        raise InvalidInput(f"zero columns at {np.flatnonzero(norms == 0.0).tolist()}")
    return A / norms, norms
