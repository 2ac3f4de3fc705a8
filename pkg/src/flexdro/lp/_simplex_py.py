"""Pure numpy bounded-variable primal revised simplex.

This is the reference implementation of the pivot loop; ``_simplex.pyx``
mirrors it line for line in typed Cython. Both solve

    min c·x  s.t.  A x = b,  lo <= x <= up

where the last ``m`` columns of ``A`` form the identity (slacks and
artificials), from a starting basis, using a composite phase 1 (minimize the sum of basic
bound violations) so that any basis, feasible or not, is a valid warm start.
"""
import numpy as np

from ._factor import basis_inverse

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3
OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2, 3


def normalize_state(lo, up, state):
    for j in range(state.shape[0]):
        s = state[j]
        if s == BASIC:
            continue
        if s == AT_LOWER and not np.isfinite(lo[j]):
            s = AT_UPPER if np.isfinite(up[j]) else AT_ZERO
        elif s == AT_UPPER and not np.isfinite(up[j]):
            s = AT_LOWER if np.isfinite(lo[j]) else AT_ZERO
        elif s == AT_ZERO and (np.isfinite(lo[j]) or np.isfinite(up[j])):
            s = AT_LOWER if np.isfinite(lo[j]) else AT_UPPER
        state[j] = s


def _nonbasic_values(lo, up, state):
    x = np.zeros(state.shape[0])
    at_lo = state == AT_LOWER
    at_up = state == AT_UPPER
    x[at_lo] = lo[at_lo]
    x[at_up] = up[at_up]
    return x


def _refactor(A, b, lo, up, basis, state):
    Binv = basis_inverse(A, basis)
    x = _nonbasic_values(lo, up, state)
    x[basis] = Binv @ (b - A @ x)
    return Binv, x


def _residual_ok(A, b, x, feas_tol):
    r = b - A @ x
    return float(np.max(np.abs(r), initial=0.0)) <= feas_tol * (1.0 + float(np.max(np.abs(b), initial=0.0)))


def simplex_core(A, b, c, lo, up, basis, state, binv, max_iter, feas_tol, opt_tol,
                 pivot_tol, bland_after, refactor_every):
    """Run the pivot loop; ``basis`` and ``state`` are updated in place.

    ``binv`` may carry the inverse of the starting basis (it is overwritten);
    ``None`` means factor from scratch. Returns ``(code, x, y, iterations,
    binv)`` where ``y`` holds the simplex multipliers of the phase-2 costs on
    optimality, or the phase-1 multipliers (a Farkas-type certificate) on
    infeasibility. Optimality is confirmed on a fresh factorization unless few
    updates have accumulated and the primal residual is already tiny.
    """
    m, ntot = A.shape
    normalize_state(lo, up, state)
    if binv is None:
        Binv, x = _refactor(A, b, lo, up, basis, state)
    else:
        Binv = binv
        x = _nonbasic_values(lo, up, state)
        x[basis] = 0.0
        x[basis] = Binv @ (b - A @ x)
    it = 0
    degenerate = 0
    since_refactor = 0
    cc = np.empty(ntot)
    while True:
        xB = x[basis]
        loB = lo[basis]
        upB = up[basis]
        below = xB < loB - feas_tol
        above = xB > upB + feas_tol
        phase1 = bool(below.any() or above.any())
        if phase1:
            cc[:] = 0.0
            cc[basis] = above.astype(float) - below.astype(float)
        else:
            cc[:] = c
        y = cc[basis] @ Binv
        d = cc - y @ A

        nonbasic = state != BASIC
        movable = up > lo
        inc = nonbasic & movable & (d < -opt_tol) & ((state == AT_LOWER) | (state == AT_ZERO))
        dec = nonbasic & movable & (d > opt_tol) & ((state == AT_UPPER) | (state == AT_ZERO))
        eligible = inc | dec
        if not eligible.any():
            fresh_enough = (not phase1 and 2 * since_refactor <= refactor_every
                            and _residual_ok(A, b, x, feas_tol))
            if since_refactor > 0 and not fresh_enough:
                Binv, x = _refactor(A, b, lo, up, basis, state)
                since_refactor = 0
                continue
            if phase1:
                return INFEASIBLE, x, y, it, Binv
            return OPTIMAL, x, y, it, Binv
        if it >= max_iter:
            return ITERATION_LIMIT, x, y, it, Binv

        if degenerate >= bland_after:
            q = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            q = int(np.argmax(score))
        direction = 1.0 if inc[q] else -1.0

        alpha = Binv @ A[:, q]
        rate = -direction * alpha
        big = np.abs(alpha) > pivot_tol
        dec_rows = big & (rate < 0.0)
        inc_rows = big & (rate > 0.0)
        t_all = np.full(m, np.inf)
        to_up = np.zeros(m, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            # decreasing basics: an above-upper variable first meets its upper
            # bound (phase 1); a feasible one blocks at its lower bound
            sel = dec_rows & above
            t_all[sel] = (xB[sel] - upB[sel]) / -rate[sel]
            to_up[sel] = True
            sel = dec_rows & ~above & ~below & np.isfinite(loB)
            t_all[sel] = np.maximum(xB[sel] - loB[sel], 0.0) / -rate[sel]
            sel = inc_rows & below
            t_all[sel] = (loB[sel] - xB[sel]) / rate[sel]
            sel = inc_rows & ~above & ~below & np.isfinite(upB)
            t_all[sel] = np.maximum(upB[sel] - xB[sel], 0.0) / rate[sel]
            to_up[sel] = True
        t_min = t_all.min() if m else np.inf
        flip = up[q] - lo[q]
        if flip <= t_min:
            t_best = flip
            leave = -1
        else:
            t_best = t_min
            cand = np.flatnonzero(t_all <= t_min + 1e-12)
            if degenerate >= bland_after:
                leave = int(cand[np.argmin(basis[cand])])
            else:
                leave = int(cand[np.argmax(np.abs(alpha[cand]))])
            leave_to_upper = bool(to_up[leave])

        if not np.isfinite(t_best):
            if phase1:
                # Lost a descent direction to round-off; refactor and retry once.
                if since_refactor > 0:
                    Binv, x = _refactor(A, b, lo, up, basis, state)
                    since_refactor = 0
                    continue
                raise FloatingPointError("phase 1 ratio test found no blocking variable")
            return UNBOUNDED, x, y, it, Binv

        t = t_best
        x[q] += direction * t
        x[basis] -= direction * t * alpha
        if leave < 0:
            state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
            x[q] = up[q] if state[q] == AT_UPPER else lo[q]
        else:
            jl = basis[leave]
            if leave_to_upper:
                state[jl] = AT_UPPER
                x[jl] = up[jl]
            else:
                state[jl] = AT_LOWER
                x[jl] = lo[jl]
            basis[leave] = q
            state[q] = BASIC
            piv = alpha[leave]
            row = Binv[leave] / piv
            Binv -= np.outer(alpha, row)
            Binv[leave] = row
            since_refactor += 1
        if t <= 1e-12:
            degenerate += 1
        else:
            degenerate = 0
        it += 1
        if since_refactor >= refactor_every:
            Binv, x = _refactor(A, b, lo, up, basis, state)
            since_refactor = 0
