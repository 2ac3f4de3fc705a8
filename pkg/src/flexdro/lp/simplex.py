"""Dense LP solve on top of the bounded-variable simplex core.

The compiled core (``_simplex``) is used when it was built; otherwise, or
when ``FLEXDRO_PURE_PYTHON=1`` is set, the numpy reference loop in
``_simplex_py`` runs instead. Both apply the same pricing and ratio rules;
round-off in the dot products may occasionally break a tie differently.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _simplex_py
from .model import DEFAULT_TOLERANCES, LinearProgram, SolverSolution, Status, Tolerances

_core = None
if os.environ.get("FLEXDRO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _simplex as _compiled  # type: ignore[attr-defined]

        _core = _compiled.simplex_core
    except ImportError:  # extension not built
        _core = None

CORE_NAME = "cython" if _core is not None else "python"
if _core is None:
    _core = _simplex_py.simplex_core

_CODES = {
    _simplex_py.OPTIMAL: Status.OPTIMAL,
    _simplex_py.INFEASIBLE: Status.INFEASIBLE,
    _simplex_py.UNBOUNDED: Status.UNBOUNDED,
    _simplex_py.ITERATION_LIMIT: Status.ITERATION_LIMIT,
}


@dataclass
class Basis:
    """Warm-start record: basic column per row, nonbasic bound states and,
    optionally, the inverse of the basis matrix (saves the first factorization)."""

    basis: np.ndarray
    state: np.ndarray
    binv: Optional[np.ndarray] = None

    def copy(self, with_inverse: bool = True) -> "Basis":
        binv = self.binv.copy() if (with_inverse and self.binv is not None) else None
        return Basis(self.basis.copy(), self.state.copy(), binv)


def standard_form(lp: LinearProgram):
    """Append a slack per ``<=`` row and a fixed artificial per ``=`` row."""
    n = lp.num_vars
    m_ub, m_eq = lp.num_ub, lp.num_eq
    m = m_ub + m_eq
    A = np.zeros((m, n + m))
    A[:m_ub, :n] = lp.A_ub
    A[m_ub:, :n] = lp.A_eq
    A[:, n:] = np.eye(m)
    b = np.concatenate([lp.b_ub, lp.b_eq])
    c = np.zeros(n + m)
    c[:n] = -lp.c if lp.maximize else lp.c
    lo = np.concatenate([lp.lower, np.zeros(m)])
    up = np.concatenate([lp.upper, np.full(m_ub, np.inf), np.zeros(m_eq)])
    return A, b, c, lo, up


def slack_basis(n: int, m: int) -> Basis:
    basis = np.arange(n, n + m, dtype=np.int64)
    state = np.zeros(n + m, dtype=np.int8)
    state[basis] = _simplex_py.BASIC
    return Basis(basis, state)


class PreparedLP:
    """A problem converted to standard form once, then solved repeatedly with
    different bounds, right-hand sides or costs (same constraint matrix)."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        self.A, self.b, self.c, self.lo, self.up = standard_form(lp)
        self.n = lp.num_vars
        self.m = self.A.shape[0]

    def solve(self, tol: Tolerances = DEFAULT_TOLERANCES, warm: Basis | None = None, *,
              lower=None, upper=None, c=None, b_ub=None, b_eq=None) -> SolverSolution:
        lp, n, m = self.lp, self.n, self.m
        A = self.A
        b, cs, lo, up = self.b, self.c, self.lo, self.up
        if b_ub is not None or b_eq is not None:
            b = b.copy()
            if b_ub is not None:
                b[: lp.num_ub] = b_ub
            if b_eq is not None:
                b[lp.num_ub:] = b_eq
        cost = lp.c
        if c is not None:
            cost = np.asarray(c, dtype=float)
            cs = cs.copy()
            cs[:n] = -cost if lp.maximize else cost
        if lower is not None:
            lo = lo.copy()
            lo[:n] = lower
        if upper is not None:
            up = up.copy()
            up[:n] = upper
        if m == 0:
            return _solve_unconstrained(lp, cs, lo, up, cost)
        ntot = n + m
        if warm is not None and warm.state.shape[0] == ntot and warm.basis.shape[0] == m:
            start = warm.copy()
        else:
            start = slack_basis(n, m)
        code, x, y, iters, binv = _core(
            A, b, cs, lo, up, start.basis, start.state, start.binv, tol.max_pivots, tol.feas_tol,
            tol.opt_tol, tol.pivot_tol, tol.bland_after, tol.refactor_every,
        )
        start.binv = np.asarray(binv)
        status = _CODES[int(code)]
        x = np.asarray(x)
        y = np.asarray(y)
        sol = SolverSolution(status=status, iterations=int(iters), basis=start)
        if status is Status.INFEASIBLE:
            sol.farkas = y.copy()
            return sol
        sol.x = x[:n].copy()
        if status is not Status.OPTIMAL:
            return sol
        sign = -1.0 if lp.maximize else 1.0
        sol.objective = float(cost @ sol.x)
        sol.duals = sign * y
        sol.reduced_costs = sign * (cs[:n] - y @ A[:, :n])
        return sol


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOLERANCES,
             warm: Basis | None = None) -> SolverSolution:
    """Solve ``lp`` with the bundled simplex; ``warm`` may be any earlier basis
    of a problem with the same constraint matrix (bounds and costs may differ).
    """
    return PreparedLP(lp).solve(tol, warm)


def _solve_unconstrained(lp, c, lo, up, cost) -> SolverSolution:
    n = lp.num_vars
    x = np.zeros(n)
    for j in range(n):
        if c[j] > 0:
            x[j] = lo[j]
        elif c[j] < 0:
            x[j] = up[j]
        else:
            x[j] = lo[j] if np.isfinite(lo[j]) else (up[j] if np.isfinite(up[j]) else 0.0)
        if not np.isfinite(x[j]):
            return SolverSolution(status=Status.UNBOUNDED, x=x)
    sign = -1.0 if lp.maximize else 1.0
    return SolverSolution(
        status=Status.OPTIMAL, x=x, objective=float(cost @ x), duals=np.zeros(0),
        reduced_costs=sign * c[:n].copy(),
    )
