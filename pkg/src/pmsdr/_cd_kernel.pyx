# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled elastic-net coordinate descent.

Mirrors ``_cd_fallback.enet_cd`` step for step; see that module for the
schedule. The solve releases the GIL so columns can run on threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


cdef inline double _soft(double z, double t) nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


cdef double _sweep(const double[:, ::1] K, const double[::1] b, const double[::1] diag,
                   const double[::1] denom, double[::1] r, double[::1] q,
                   const cnp.int64_t[::1] coords, Py_ssize_t ncoords,
                   double lam, double gamma) noexcept nogil:
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t c, i, k
    cdef double ri, z, new, delta, step
    cdef double max_change = 0.0
    for c in range(ncoords):
        i = coords[c]
        ri = r[i]
        z = gamma * (b[i] - q[i] + diag[i] * ri)
        new = _soft(z, lam) / denom[i]
        if new != ri:
            delta = new - ri
            r[i] = new
            for k in range(n):
                q[k] += delta * K[i, k]
            step = fabs(delta) * denom[i]
            if step > max_change:
                max_change = step
    return max_change


cdef double _kkt(const double[::1] b, double[::1] r, double[::1] q, Py_ssize_t j,
                 double lam, double gamma) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i
    cdef double grad, v, sgn
    cdef double worst = 0.0
    for i in range(n):
        if i == j:
            continue
        grad = gamma * (b[i] - q[i])
        if r[i] != 0.0:
            sgn = 1.0 if r[i] > 0.0 else -1.0
            v = fabs(grad - lam * sgn - (1.0 - lam) * r[i])
        else:
            v = fabs(grad) - lam
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


def enet_cd(K, b, Py_ssize_t j, double lam, double gamma, double tol, long max_iter, order,
            r0=None, check_objective=False):
    """Compiled twin of :func:`pmsdr._cd_fallback.enet_cd`.

    ``check_objective`` is accepted for signature parity and ignored.
    """
    cdef const double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = Kv.shape[0]
    if r0 is None:
        r_arr = np.zeros(n)
    else:
        r_arr = np.array(r0, dtype=np.float64)
        r_arr[j] = 0.0
    q_arr = np.ascontiguousarray(np.asarray(K, dtype=np.float64) @ r_arr)
    diag_arr = np.ascontiguousarray(np.diag(np.asarray(K, dtype=np.float64)))
    denom_arr = (1.0 - lam) + gamma * diag_arr
    cdef double[::1] r = r_arr
    cdef double[::1] q = q_arr
    cdef const double[::1] diag = diag_arr
    cdef const double[::1] denom = denom_arr
    order_arr = np.asarray(order, dtype=np.int64)
    full_arr = np.ascontiguousarray(order_arr[order_arr != j], dtype=np.int64)
    cdef const cnp.int64_t[::1] full = full_arr
    cdef cnp.int64_t[::1] active = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t nfull = full.shape[0]
    cdef Py_ssize_t nact, c
    cdef long sweeps = 0
    cdef double kkt = INFINITY
    cdef double change
    cdef double inner_tol = 0.1 * tol

    with nogil:
        while sweeps < max_iter:
            _sweep(Kv, bv, diag, denom, r, q, full, nfull, lam, gamma)
            sweeps += 1
            kkt = _kkt(bv, r, q, j, lam, gamma)
            if kkt <= tol:
                break
            while sweeps < max_iter:
                nact = 0
                for c in range(nfull):
                    if r[full[c]] != 0.0:
                        active[nact] = full[c]
                        nact += 1
                change = _sweep(Kv, bv, diag, denom, r, q, active, nact, lam, gamma)
                sweeps += 1
                if change <= inner_tol:
                    break
    return r_arr, int(sweeps), float(kkt)
