# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pivot loop; a typed transcription of ``_simplex_py.simplex_core``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY, isfinite

from ._factor import basis_inverse

cnp.import_array()

cdef enum:
    AT_LOWER = 0
    AT_UPPER = 1
    AT_ZERO = 2
    BASIC = 3


cdef void _nonbasic_values(double[::1] lo, double[::1] up, signed char[::1] state,
                           double[::1] x) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(state.shape[0]):
        if state[j] == AT_LOWER:
            x[j] = lo[j]
        elif state[j] == AT_UPPER:
            x[j] = up[j]
        else:
            x[j] = 0.0


cdef object _refactor(cnp.ndarray A, double[::1] b, double[::1] lo, double[::1] up,
                      cnp.int64_t[::1] basis, signed char[::1] state, double[::1] x,
                      object given=None):
    cdef Py_ssize_t m = A.shape[0], ntot = A.shape[1], i, j
    cdef cnp.ndarray Binv = basis_inverse(A, np.asarray(basis)) if given is None else given
    cdef double[:, ::1] Av = A
    cdef double[::1] r = np.array(b, dtype=np.float64)
    cdef double[::1] xb = np.empty(m)
    cdef double[:, ::1] Bv = np.ascontiguousarray(Binv)
    cdef double s
    _nonbasic_values(lo, up, state, x)
    for i in range(m):
        x[basis[i]] = 0.0
    for i in range(m):
        s = r[i]
        for j in range(ntot):
            s -= Av[i, j] * x[j]
        r[i] = s
    for i in range(m):
        s = 0.0
        for j in range(m):
            s += Bv[i, j] * r[j]
        xb[i] = s
    for i in range(m):
        x[basis[i]] = xb[i]
    return np.asarray(Bv)


cdef bint _residual_ok(double[:, ::1] Av, double[::1] b, double[::1] x, double feas_tol) noexcept:
    cdef Py_ssize_t m = Av.shape[0], ntot = Av.shape[1], i, j
    cdef double s, worst = 0.0, bmax = 0.0
    for i in range(m):
        s = b[i]
        for j in range(ntot):
            s -= Av[i, j] * x[j]
        if fabs(s) > worst:
            worst = fabs(s)
        if fabs(b[i]) > bmax:
            bmax = fabs(b[i])
    return worst <= feas_tol * (1.0 + bmax)


def simplex_core(cnp.ndarray A, b, c, lo, up, cnp.int64_t[::1] basis,
                 signed char[::1] state, binv, long max_iter, double feas_tol,
                 double opt_tol, double pivot_tol, long bland_after,
                 long refactor_every):
    A = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] Av = A
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] upv = np.ascontiguousarray(up, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0], ntot = A.shape[1]
    cdef Py_ssize_t i, j, k, q, leave, jl
    cdef double[::1] x = np.zeros(ntot)
    cdef double[::1] y = np.zeros(m)
    cdef double[::1] d = np.zeros(ntot)
    cdef double[::1] cc = np.zeros(ntot)
    cdef double[::1] alpha = np.zeros(m)
    cdef double[::1] rowv = np.zeros(m)
    cdef double[::1] t_all = np.zeros(m)
    cdef signed char[::1] to_up = np.zeros(m, dtype=np.int8)
    cdef signed char[::1] below = np.zeros(m, dtype=np.int8)
    cdef signed char[::1] above = np.zeros(m, dtype=np.int8)
    cdef double[:, ::1] Bv
    cdef long it = 0, degenerate = 0, since_refactor = 0
    cdef bint phase1, is_inc, bland, leave_to_upper
    cdef double s, best, score, direction, t_min, t_best, flip, a, rate, xi, piv, bestpiv
    cdef cnp.int64_t bestidx

    # normalize nonbasic states to finite bounds
    for j in range(ntot):
        if state[j] == BASIC:
            continue
        if state[j] == AT_LOWER and not isfinite(lov[j]):
            state[j] = AT_UPPER if isfinite(upv[j]) else AT_ZERO
        elif state[j] == AT_UPPER and not isfinite(upv[j]):
            state[j] = AT_LOWER if isfinite(lov[j]) else AT_ZERO
        elif state[j] == AT_ZERO and (isfinite(lov[j]) or isfinite(upv[j])):
            state[j] = AT_LOWER if isfinite(lov[j]) else AT_UPPER

    # column-compressed copy of A for pricing and the entering column
    cdef cnp.int64_t[::1] colptr = np.zeros(ntot + 1, dtype=np.int64)
    cdef Py_ssize_t nnz = 0
    for j in range(ntot):
        for i in range(m):
            if Av[i, j] != 0.0:
                nnz += 1
        colptr[j + 1] = nnz
    cdef cnp.int64_t[::1] rowidx = np.zeros(max(nnz, 1), dtype=np.int64)
    cdef double[::1] vals = np.zeros(max(nnz, 1))
    cdef Py_ssize_t p
    nnz = 0
    for j in range(ntot):
        for i in range(m):
            if Av[i, j] != 0.0:
                rowidx[nnz] = i
                vals[nnz] = Av[i, j]
                nnz += 1

    if binv is None:
        Bv = _refactor(A, bv, lov, upv, basis, state, x)
    else:
        Bv = _refactor(A, bv, lov, upv, basis, state, x, np.ascontiguousarray(binv, dtype=np.float64))
    while True:
        phase1 = False
        for i in range(m):
            xi = x[basis[i]]
            below[i] = xi < lov[basis[i]] - feas_tol
            above[i] = xi > upv[basis[i]] + feas_tol
            if below[i] or above[i]:
                phase1 = True
        if phase1:
            for j in range(ntot):
                cc[j] = 0.0
            for i in range(m):
                cc[basis[i]] = <double>above[i] - <double>below[i]
        else:
            for j in range(ntot):
                cc[j] = cv[j]
        # y = c_B Binv
        for j in range(m):
            y[j] = 0.0
        for i in range(m):
            s = cc[basis[i]]
            if s != 0.0:
                for j in range(m):
                    y[j] += s * Bv[i, j]
        # d = cc - y A (nonbasic columns only; basic reduced costs are zero)
        for j in range(ntot):
            if state[j] == BASIC:
                d[j] = 0.0
                continue
            s = cc[j]
            for p in range(colptr[j], colptr[j + 1]):
                s -= y[rowidx[p]] * vals[p]
            d[j] = s

        bland = degenerate >= bland_after
        q = -1
        best = -1.0
        is_inc = False
        for j in range(ntot):
            if state[j] == BASIC or not (upv[j] > lov[j]):
                continue
            if d[j] < -opt_tol and (state[j] == AT_LOWER or state[j] == AT_ZERO):
                score = -d[j]
                if bland:
                    q = j
                    is_inc = True
                    break
                if score > best:
                    best = score
                    q = j
                    is_inc = True
            elif d[j] > opt_tol and (state[j] == AT_UPPER or state[j] == AT_ZERO):
                score = d[j]
                if bland:
                    q = j
                    is_inc = False
                    break
                if score > best:
                    best = score
                    q = j
                    is_inc = False
        if q < 0:
            if since_refactor > 0 and (phase1 or 2 * since_refactor > refactor_every
                                       or not _residual_ok(Av, bv, x, feas_tol)):
                Bv = _refactor(A, bv, lov, upv, basis, state, x)
                since_refactor = 0
                continue
            if phase1:
                return 1, np.asarray(x), np.asarray(y), it, np.asarray(Bv)
            return 0, np.asarray(x), np.asarray(y), it, np.asarray(Bv)
        if it >= max_iter:
            return 3, np.asarray(x), np.asarray(y), it, np.asarray(Bv)
        direction = 1.0 if is_inc else -1.0

        for i in range(m):
            alpha[i] = 0.0
        for p in range(colptr[q], colptr[q + 1]):
            k = rowidx[p]
            a = vals[p]
            for i in range(m):
                alpha[i] += Bv[i, k] * a

        t_min = INFINITY
        for i in range(m):
            t_all[i] = INFINITY
            to_up[i] = 0
            a = alpha[i]
            if fabs(a) <= pivot_tol:
                continue
            rate = -direction * a
            xi = x[basis[i]]
            if rate < 0.0:
                if above[i]:
                    t_all[i] = (xi - upv[basis[i]]) / -rate
                    to_up[i] = 1
                elif not below[i] and isfinite(lov[basis[i]]):
                    t_all[i] = (xi - lov[basis[i]] if xi - lov[basis[i]] > 0.0 else 0.0) / -rate
            else:
                if below[i]:
                    t_all[i] = (lov[basis[i]] - xi) / rate
                elif not above[i] and isfinite(upv[basis[i]]):
                    t_all[i] = (upv[basis[i]] - xi if upv[basis[i]] - xi > 0.0 else 0.0) / rate
                    to_up[i] = 1
            if t_all[i] < t_min:
                t_min = t_all[i]

        flip = upv[q] - lov[q]
        leave = -1
        leave_to_upper = False
        if flip <= t_min:
            t_best = flip
        else:
            t_best = t_min
            bestpiv = -1.0
            bestidx = -1
            for i in range(m):
                if t_all[i] <= t_min + 1e-12:
                    if bland:
                        if leave < 0 or basis[i] < bestidx:
                            leave = i
                            bestidx = basis[i]
                    elif fabs(alpha[i]) > bestpiv:
                        bestpiv = fabs(alpha[i])
                        leave = i
            if leave >= 0:
                leave_to_upper = to_up[leave] != 0

        if not isfinite(t_best):
            if phase1:
                if since_refactor > 0:
                    Bv = _refactor(A, bv, lov, upv, basis, state, x)
                    since_refactor = 0
                    continue
                raise FloatingPointError("phase 1 ratio test found no blocking variable")
            return 2, np.asarray(x), np.asarray(y), it, np.asarray(Bv)

        x[q] += direction * t_best
        for i in range(m):
            x[basis[i]] -= direction * t_best * alpha[i]
        if leave < 0:
            state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
            x[q] = upv[q] if state[q] == AT_UPPER else lov[q]
        else:
            jl = basis[leave]
            if leave_to_upper:
                state[jl] = AT_UPPER
                x[jl] = upv[jl]
            else:
                state[jl] = AT_LOWER
                x[jl] = lov[jl]
            basis[leave] = q
            state[q] = BASIC
            piv = alpha[leave]
            for j in range(m):
                rowv[j] = Bv[leave, j] / piv
            for i in range(m):
                a = alpha[i]
                if a != 0.0:
                    for j in range(m):
                        Bv[i, j] -= a * rowv[j]
            for j in range(m):
                Bv[leave, j] = rowv[j]
            since_refactor += 1
        if t_best <= 1e-12:
            degenerate += 1
        else:
            degenerate = 0
        it += 1
        if since_refactor >= refactor_every:
            Bv = _refactor(A, bv, lov, upv, basis, state, x)
            since_refactor = 0
