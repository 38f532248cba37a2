# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the sampling/scoring kernels.

Mirrors ceassoc._kernels_py decision-for-decision: the same counter-based
uniforms (SplitMix64-style folds over the coordinates seed, domain,
iteration, sample, attempt, user, bit), the same rejection / fallback /
repair order, and the same sequential reduction order for scores. Sampled
assignments are therefore identical across backends; scores may differ by
a few ULPs where libm and NumPy round transcendentals differently.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log

from .errors import ContractError

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef cnp.uint64_t uint64
ctypedef cnp.int64_t int64

cdef uint64 GOLDEN = <uint64>0x9E3779B97F4A7C15
cdef uint64 MUL1 = <uint64>0xBF58476D1CE4E5B9
cdef uint64 MUL2 = <uint64>0x94D049BB133111EB
cdef double U01_SCALE = 1.0 / 9007199254740992.0  # 2**-53
cdef int DOMAIN_SAMPLE = 1


cdef inline uint64 _mix64(uint64 z) nogil:
    z = (z ^ (z >> 30)) * MUL1
    z = (z ^ (z >> 27)) * MUL2
    return z ^ (z >> 31)


cdef inline uint64 _fold(uint64 z, uint64 w) nogil:
    return _mix64(z + GOLDEN * (w + <uint64>1))


cdef inline double _u01(uint64 key) nogil:
    return <double>(key >> 11) * U01_SCALE


cdef void _repair(int64[::1] row, const double[:, ::1] pref,
                  const int64[::1] cap, int64[::1] loads,
                  Py_ssize_t n_users, Py_ssize_t n_bs) noexcept nogil:
    cdef Py_ssize_t i, j, jj, best_i, best_j
    cdef double best_p, best_q
    for j in range(n_bs):
        while loads[j] > cap[j]:
            best_i = -1
            best_p = INFINITY
            for i in range(n_users):
                if row[i] == j and pref[i, j] < best_p:
                    best_p = pref[i, j]
                    best_i = i
            best_j = -1
            best_q = -INFINITY
            for jj in range(n_bs):
                if loads[jj] < cap[jj] and pref[best_i, jj] > best_q:
                    best_q = pref[best_i, jj]
                    best_j = jj
            row[best_i] = best_j
            loads[j] -= 1
            loads[best_j] += 1


def repair_capacity(assign, pref, cap):
    """Deterministic cap repair; see the NumPy backend for the rules."""
    out = np.array(assign, dtype=np.int64, copy=True)
    cdef int64[::1] row = out
    cdef const double[:, ::1] p = np.ascontiguousarray(pref, dtype=np.float64)
    cdef const int64[::1] c = np.ascontiguousarray(cap, dtype=np.int64)
    cdef Py_ssize_t n_users = row.shape[0]
    cdef Py_ssize_t n_bs = c.shape[0]
    loads_arr = np.zeros(n_bs, dtype=np.int64)
    cdef int64[::1] loads = loads_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n_users):
            loads[row[i]] += 1
        _repair(row, p, c, loads, n_users, n_bs)
    return out


def batch_loads(assign, n_bs):
    """Per-BS load counts for a (n, I) batch of assignments."""
    cdef const int64[:, ::1] a = np.ascontiguousarray(assign, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0], n_users = a.shape[1], J = n_bs
    out = np.zeros((n, J), dtype=np.int64)
    cdef int64[:, ::1] loads = out
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(n):
            for i in range(n_users):
                loads[k, a[k, i]] += 1
    return out


def sample_assignments(u2d, cap, seed, iteration, sample_offset, n_samples,
                       max_row_resamples, max_vector_resamples):
    """Draw n_samples feasible assignments from the Bernoulli model."""
    u_arr = np.ascontiguousarray(u2d, dtype=np.float64)
    cdef Py_ssize_t n_users = u_arr.shape[0], n_bs = u_arr.shape[1]
    cap_arr = np.ascontiguousarray(cap, dtype=np.int64)
    if cap_arr.shape[0] != n_bs:
        raise ContractError("cap length must equal the BS count")
    if int(cap_arr.sum()) < n_users:
        raise ContractError(
            f"total capacity {int(cap_arr.sum())} cannot host {n_users} users")

    # Shared with the fallback so categorical thresholds match exactly.
    cum_arr = np.cumsum(u_arr, axis=1) if n_bs else np.zeros((n_users, 0))

    out = np.empty((n_samples, n_users), dtype=np.int64)
    if n_samples == 0 or n_users == 0:
        return out

    cdef const double[:, ::1] u = u_arr
    cdef const double[:, ::1] cum = np.ascontiguousarray(cum_arr, dtype=np.float64)
    cdef const int64[::1] caps = cap_arr
    cdef int64[:, ::1] res = out
    loads_arr = np.zeros(n_bs, dtype=np.int64)
    cdef int64[::1] loads = loads_arr
    row_arr = np.empty(n_users, dtype=np.int64)
    cdef int64[::1] row = row_arr

    cdef uint64 base = _fold(_fold(<uint64>seed, <uint64>DOMAIN_SAMPLE),
                             <uint64>iteration)
    cdef uint64 z_s, z_v, z_i, z_r
    cdef Py_ssize_t k, i, j, r, v, first, nbits
    cdef int64 chosen
    cdef double x, total, thr
    cdef bint violated, accepted
    cdef Py_ssize_t offset = sample_offset
    cdef Py_ssize_t rrow = max_row_resamples, rvec = max_vector_resamples
    cdef Py_ssize_t ns = n_samples

    with nogil:
        for k in range(ns):
            z_s = _fold(base, <uint64>(offset + k))
            accepted = False
            for v in range(rvec):
                z_v = _fold(z_s, <uint64>v)
                for i in range(n_users):
                    z_i = _fold(z_v, <uint64>i)
                    chosen = -1
                    for r in range(rrow):
                        z_r = _fold(z_i, <uint64>r)
                        nbits = 0
                        first = -1
                        for j in range(n_bs):
                            if _u01(_fold(z_r, <uint64>j)) < u[i, j]:
                                nbits += 1
                                if first < 0:
                                    first = j
                        if nbits == 1:
                            chosen = first
                            break
                    if chosen < 0:
                        # categorical fallback: attempt slot rrow, bit slot 0
                        x = _u01(_fold(_fold(z_i, <uint64>rrow), <uint64>0))
                        total = cum[i, n_bs - 1]
                        if total > 0.0:
                            thr = x * total
                            chosen = n_bs - 1
                            for j in range(n_bs):
                                if cum[i, j] > thr:
                                    chosen = j
                                    break
                        else:
                            chosen = <int64>(x * n_bs)
                            if chosen > n_bs - 1:
                                chosen = n_bs - 1
                    row[i] = chosen
                for j in range(n_bs):
                    loads[j] = 0
                for i in range(n_users):
                    loads[row[i]] += 1
                violated = False
                for j in range(n_bs):
                    if loads[j] > caps[j]:
                        violated = True
                        break
                if not violated:
                    accepted = True
                    break
            if not accepted:
                _repair(row, u, caps, loads, n_users, n_bs)
            for i in range(n_users):
                res[k, i] = row[i]
    return out


def score_assignments(assign, value, metric, load_log_scale):
    """Objective values for a (n, I) batch; see the NumPy backend."""
    a_arr = np.ascontiguousarray(assign, dtype=np.int64)
    v_arr = np.ascontiguousarray(value, dtype=np.float64)
    cdef Py_ssize_t n = a_arr.shape[0], n_users = a_arr.shape[1]
    cdef Py_ssize_t n_bs = v_arr.shape[1]
    if v_arr.shape[0] != n_users:
        raise ContractError("value matrix and assignments disagree on user count")
    out = np.zeros(n, dtype=np.float64)
    if n_users == 0 or n == 0:
        return out

    cdef const int64[:, ::1] a = a_arr
    cdef const double[:, ::1] val = v_arr
    cdef double[::1] res = out
    loads_arr = np.zeros(n_bs, dtype=np.int64)
    cdef int64[::1] loads = loads_arr
    cdef int met = metric
    cdef double scale = load_log_scale
    cdef Py_ssize_t k, i, j
    cdef double s, lt

    with nogil:
        for k in range(n):
            for j in range(n_bs):
                loads[j] = 0
            for i in range(n_users):
                loads[a[k, i]] += 1
            s = 0.0
            if met == 0:
                for i in range(n_users):
                    s += val[i, a[k, i]]
                lt = 0.0
                for j in range(n_bs):
                    if loads[j] > 0:
                        lt += loads[j] * log(<double>loads[j])
                res[k] = s - scale * lt
            else:
                for i in range(n_users):
                    s += val[i, a[k, i]] / loads[a[k, i]]
                res[k] = s
    return out
