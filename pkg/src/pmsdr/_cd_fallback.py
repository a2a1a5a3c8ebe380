"""Pure-Python elastic-net coordinate descent (reference for the compiled core).

Both backends run the same active-set schedule so their iterates agree to
rounding: a full cyclic sweep in ``order``, a KKT check, then sweeps over
the nonzero coordinates until they settle, repeated until the KKT residual
drops to ``tol`` or ``max_iter`` sweeps are spent.
"""
import math

import numpy as np


def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def kkt_residual(K, b, j, r, q, lam, gamma):
    """Max violation of the elastic-net optimality conditions.

    ``q`` must equal ``K @ r``. Coordinate ``j`` is pinned to zero and skipped.
    """
    grad = gamma * (b - q)
    active = r != 0.0
    viol = np.where(active,
                    np.abs(grad - lam * np.sign(r) - (1.0 - lam) * r),
                    np.maximum(np.abs(grad) - lam, 0.0))
    viol[j] = 0.0
    return float(viol.max()) if viol.size else 0.0


def objective(K, b, r, lam, gamma):
    """Elastic-net objective for unit-norm target (``g_j^T g_j = 1``), up to the target's own energy."""
    return float(lam * np.abs(r).sum() + 0.5 * (1.0 - lam) * (r @ r)
                 + 0.5 * gamma * (1.0 - 2.0 * (b @ r) + r @ (K @ r)))


def enet_cd(K, b, j, lam, gamma, tol, max_iter, order, r0=None, check_objective=False):
    """Solve one column of the self-representation problem.

    Parameters
    ----------
    K : ndarray (N, N)
        Gram matrix ``G^T G`` of the (column-normalized) data.
    b : ndarray (N,)
        ``G^T g_j``.
    j : int
        Index of the target column; its coefficient stays zero.
    order : ndarray of int
        Coordinate visiting order for full sweeps.
    r0 : ndarray (N,), optional
        Warm start.

    Returns
    -------
    r : ndarray (N,)
    sweeps : int
    kkt : float
        Final KKT residual; the caller decides whether it is acceptable.
    """
    N = K.shape[0]
    r = np.zeros(N) if r0 is None else np.array(r0, dtype=np.float64)
    r[j] = 0.0
    q = K @ r
    diag = np.diag(K).copy()
    denom = (1.0 - lam) + gamma * diag
    order = [int(i) for i in order if int(i) != j]
    inner_tol = 0.1 * tol
    sweeps = 0
    kkt = math.inf
    last_obj = objective(K, b, r, lam, gamma) if check_objective else None

    def sweep(coords):
        max_change = 0.0
        for i in coords:
            ri = r[i]
            z = gamma * (b[i] - q[i] + diag[i] * ri)
            new = _soft(z, lam) / denom[i]
            if new != ri:
                delta = new - ri
                r[i] = new
                q[:] += delta * K[i]
                step = abs(delta) * denom[i]
                if step > max_change:
                    max_change = step
        return max_change

    while sweeps < max_iter:
        sweep(order)
        sweeps += 1
        if check_objective:
            last_obj = _check_decrease(K, b, r, lam, gamma, last_obj)
        kkt = kkt_residual(K, b, j, r, q, lam, gamma)
        if kkt <= tol:
            break
        while sweeps < max_iter:
            active = [i for i in order if r[i] != 0.0]
            change = sweep(active)
            sweeps += 1
            if check_objective:
                last_obj = _check_decrease(K, b, r, lam, gamma, last_obj)
            if change <= inner_tol:
                break
    return r, sweeps, kkt


def _check_decrease(K, b, r, lam, gamma, last):
    obj = objective(K, b, r, lam, gamma)
    assert obj <= last + 1e-12 * max(1.0, abs(last)), f"objective rose {last} -> {obj}"
    return obj
