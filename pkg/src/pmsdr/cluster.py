"""Spectral clustering of detected inliers and per-cluster basis estimation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .errors import ClusteringError, DegenerateCluster, InsufficientData, InvalidInput
from .numerics import as_data_matrix, truncated_svd


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    L: int

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.L)


@dataclass
class SubspaceModel:
    basis: np.ndarray
    group: int
    sample_count: int

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def affinity_from_selfrep(R, inlier_mask, L: int = 1) -> np.ndarray:
    """Symmetric affinity ``|R_s| + |R_s|^T`` over the inlier rows and columns."""
    R = np.asarray(R, dtype=np.float64)
    mask = np.asarray(inlier_mask, dtype=bool)
    if mask.sum() < L:
        raise InsufficientData(f"{mask.sum()} inliers cannot form {L} clusters")
    sub = np.abs(R[np.ix_(mask, mask)])
    W = sub + sub.T
    np.fill_diagonal(W, 0.0)
    return W


def _spectral_embedding(W: np.ndarray, L: int) -> np.ndarray:
    d = W.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    lap = np.eye(W.shape[0]) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh((lap + lap.T) / 2)
    E = vecs[:, :L]
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return E / norms


def spectral_clustering(W, L: int, rng_seed: int = 0, points=None) -> ClusterAssignment:
    """Cluster the nodes of affinity ``W`` into ``L`` groups.

    Uses the symmetric normalized Laplacian, row-normalized bottom-``L``
    eigenvectors and k-means (k-means++, 20 restarts, best inertia).
    Zero-degree nodes take the label of the most cosine-similar connected
    node when ``points`` (columns) are given, else of the largest cluster.
    An empty cluster triggers one retry with a shifted seed.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidInput("affinity must be square")
    if np.any(W < 0) or not np.allclose(W, W.T):
        raise InvalidInput("affinity must be symmetric and non-negative")
    n = W.shape[0]
    if L < 1 or n < L:
        raise InsufficientData(f"cannot form {L} clusters from {n} nodes")
    if L == 1:
        return ClusterAssignment(np.zeros(n, dtype=np.int64), 1)
    if not np.any(W > 0):
        raise ClusteringError("affinity matrix is all zero")

    connected = W.sum(axis=1) > 0
    Wc = W[np.ix_(connected, connected)]
    if Wc.shape[0] < L:
        raise ClusteringError(f"only {Wc.shape[0]} connected nodes for {L} clusters")
    E = _spectral_embedding(Wc, L)
    labels_c = None
    for attempt in range(2):
        km = KMeans(n_clusters=L, init="k-means++", n_init=20, max_iter=300, tol=1e-6,
                    random_state=rng_seed + attempt)
        cand = km.fit_predict(E).astype(np.int64)
        if np.bincount(cand, minlength=L).min() > 0:
            labels_c = cand
            break
    if labels_c is None:
        raise ClusteringError("k-means produced an empty cluster twice")

    labels = np.empty(n, dtype=np.int64)
    labels[connected] = labels_c
    isolated = np.flatnonzero(~connected)
    if isolated.size:
        idx_c = np.flatnonzero(connected)
        if points is not None:
            X = np.asarray(points, dtype=np.float64)
            Xn = X / np.maximum(np.linalg.norm(X, axis=0), 1e-300)
            sim = np.abs(Xn[:, isolated].T @ Xn[:, idx_c])
            labels[isolated] = labels_c[np.argmax(sim, axis=1)]
        else:
            labels[isolated] = np.argmax(np.bincount(labels_c, minlength=L))
    return ClusterAssignment(labels, L)


def estimate_basis(X_k, r: int, group: int = 0) -> SubspaceModel:
    """Leading ``r`` left singular vectors of the cluster's columns."""
    X_k = as_data_matrix(X_k, "cluster matrix")
    if X_k.shape[1] < r:
        raise DegenerateCluster(f"cluster {group} has {X_k.shape[1]} columns, need >= {r}")
    U, _, _ = truncated_svd(X_k, r)
    return SubspaceModel(U, group, X_k.shape[1])
