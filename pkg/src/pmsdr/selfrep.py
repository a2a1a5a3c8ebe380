"""Elastic-net self-representation and the induced random-walk transition matrix."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _cd_fallback, kernels
from .errors import ConvergenceError, InvalidInput


@dataclass
class ElasticNetParams:
    """Solver settings for the per-column elastic net.

    ``gamma`` fixes the data-fit weight for every column. When it is None the
    weight is chosen per column as ``alpha / max_{i != j} |g_i^T g_j|``.
    """

    lam: float = 0.95
    gamma: float | None = None
    alpha: float = 50.0
    tol: float = 1e-6
    max_iter: int = 10000

    def gamma_for(self, b: np.ndarray, j: int) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        others = np.abs(np.delete(b, j))
        peak = others.max() if others.size else 0.0
        # an isolated column keeps a finite weight; all its coefficients vanish anyway
        return float(self.alpha / peak) if peak > 0 else float(self.alpha)


POLISH_EVERY = 10


def _polish(gram, b, j, r, lam, gamma, rounds=10):
    """Exact minimizer on (a subset of) the support and sign pattern of ``r``.

    On a fixed support with fixed signs the objective is a smooth quadratic,
    so its minimizer solves ``((1-lam) I + gamma K_AA) r_A = gamma b_A - lam s``.
    Coordinates whose sign flips are dropped and the system re-solved.
    Returns None if the support empties or the solve fails.
    """
    A = np.flatnonzero(r)
    A = A[A != j]
    s = np.sign(r[A])
    for _ in range(rounds):
        if A.size == 0:
            return None
        H = gamma * gram[np.ix_(A, A)]
        H.flat[::A.size + 1] += 1.0 - lam
        try:
            rA = np.linalg.solve(H, gamma * b[A] - lam * s)
        except np.linalg.LinAlgError:
            return None
        keep = np.sign(rA) == s
        if keep.all():
            out = np.zeros_like(r)
            out[A] = rA
            return out
        A, s = A[keep], s[keep]
    return None


def _solve_with_polish(solve, gram, b, j, lam, gamma, tol, max_iter, order, check_objective):
    """Coordinate descent in chunks of sweeps, polishing the support between chunks.

    Cyclic descent identifies the support quickly but converges slowly on
    ill-conditioned supports; the polish step finishes the job exactly.
    A polished point is kept only if it does not raise the objective.
    """
    r = np.zeros(gram.shape[0])
    spent = 0
    kkt = np.inf
    while spent < max_iter:
        chunk = min(POLISH_EVERY, max_iter - spent)
        r, sweeps, kkt = solve(gram, b, j, lam, gamma, tol, chunk, order,
                               r0=r, check_objective=check_objective)
        spent += sweeps
        if kkt <= tol:
            break
        cand = _polish(gram, b, j, r, lam, gamma)
        if cand is None:
            continue
        cand_kkt = _cd_fallback.kkt_residual(gram, b, j, cand, gram @ cand, lam, gamma)
        if cand_kkt <= tol:
            return cand, spent, cand_kkt
        if _cd_fallback.objective(gram, b, cand, lam, gamma) <= _cd_fallback.objective(gram, b, r, lam, gamma):
            r = cand
    return r, spent, kkt


def _check_normalized(G: np.ndarray) -> None:
    norms = np.linalg.norm(G, axis=0)
    if np.any(norms == 0):
        raise InvalidInput("zero columns cannot be self-represented")
    if not np.allclose(norms, 1.0, atol=1e-8):
        raise InvalidInput("columns must be normalized to unit l2 norm")


def solve_elastic_net_column(j: int, G, lam: float = 0.95, gamma: float | None = None,
                             tol: float = 1e-6, max_iter: int = 10000, *, alpha: float = 50.0,
                             order=None, gram=None, backend: str | None = None,
                             check_objective: bool = False) -> np.ndarray:
    """Coefficients expressing column ``j`` of ``G`` through the other columns.

    Minimizes ``lam*|r|_1 + (1-lam)/2*|r|_2^2 + gamma/2*|g_j - G r|_2^2`` with
    ``r[j] = 0`` by cyclic coordinate descent. Raises
    :class:`~pmsdr.errors.ConvergenceError` if the KKT residual is still above
    ``tol`` after ``max_iter`` sweeps.
    """
    G = np.asarray(G, dtype=np.float64)
    if gram is None:
        _check_normalized(G)
        gram = G.T @ G
    N = gram.shape[0]
    if not 0 <= j < N:
        raise IndexError(f"column {j} out of range for {N} columns")
    params = ElasticNetParams(lam, gamma, alpha, tol, max_iter)
    b = np.ascontiguousarray(gram[j])
    g = params.gamma_for(b, j)
    if order is None:
        order = np.arange(N)
    solve = kernels.get_enet_cd(backend)
    r, _, kkt = _solve_with_polish(solve, gram, b, j, float(lam), g, float(tol), int(max_iter),
                                   np.asarray(order, dtype=np.int64), check_objective)
    if not kkt <= tol:
        raise ConvergenceError(f"column {j}: KKT residual {kkt:.3g} > {tol:g}", kkt, (j,))
    r[j] = 0.0
    return r


def self_representation(G, params: ElasticNetParams | None = None, threads: int = 1,
                        backend: str | None = None) -> np.ndarray:
    """Self-representation matrix ``R`` whose column ``j`` represents ``g_j``.

    Columns are solved independently (optionally on ``threads`` workers) and
    assembled by index, so the result does not depend on scheduling.
    Non-converged columns are collected and reported together.
    """
    params = params or ElasticNetParams()
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[1] < 2:
        raise InvalidInput("need at least two columns")
    _check_normalized(G)
    gram = np.ascontiguousarray(G.T @ G)
    N = gram.shape[0]
    R = np.zeros((N, N))
    failures = {}

    def solve(j):
        try:
            return j, solve_elastic_net_column(
                j, G, params.lam, params.gamma, params.tol, params.max_iter,
                alpha=params.alpha, gram=gram, backend=backend), None
        except ConvergenceError as exc:
            return j, None, exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, range(N)))
    else:
        results = [solve(j) for j in range(N)]
    for j, col, exc in results:
        if exc is not None:
            failures[j] = exc.kkt
        else:
            R[:, j] = col
    if failures:
        cols = sorted(failures)
        raise ConvergenceError(
            f"{len(cols)} column(s) did not converge: {cols[:10]}",
            max(failures.values()), cols)
    return R


def transition_matrix(R, eps: float = 1e-12) -> np.ndarray:
    """Row-stochastic ``P`` with ``P[i, j] = |R[j, i]| / |R[:, i]|_1``.

    Rows whose column of ``R`` has (near) zero l1 norm become uniform over
    the other states.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InvalidInput("R must be square")
    N = R.shape[0]
    A = np.abs(R).T
    mass = A.sum(axis=1)
    P = np.empty_like(A)
    ok = mass >= eps
    P[ok] = A[ok] / mass[ok, None]
    if np.any(~ok):
        if N == 1:
            P[~ok] = 1.0
        else:
            P[~ok] = 1.0 / (N - 1)
            P[np.flatnonzero(~ok), np.flatnonzero(~ok)] = 0.0
    return P
