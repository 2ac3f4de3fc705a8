"""Solver backends.

Everything above the kernel talks to a backend object with ``solve_lp`` and
``solve_milp``; the bundled simplex/branch-and-bound is the default and the
HiGHS backend (through scipy) exists for cross-checking and for large cases.
"""
from __future__ import annotations

from typing import Protocol

import numpy as np

from . import bnb, simplex
from .model import DEFAULT_TOLERANCES, LinearProgram, MixedBinaryProgram, SolverSolution, Status, Tolerances


class Backend(Protocol):
    name: str

    def solve_lp(self, lp: LinearProgram, tol: Tolerances = ..., warm=None) -> SolverSolution: ...

    def solve_milp(self, p: MixedBinaryProgram, tol: Tolerances = ..., warm=None) -> SolverSolution: ...


class BundledBackend:
    name = "bundled"

    def solve_lp(self, lp, tol=DEFAULT_TOLERANCES, warm=None):
        return simplex.solve_lp(lp, tol, warm)

    def solve_milp(self, p, tol=DEFAULT_TOLERANCES, warm=None):
        return bnb.solve_milp(p, tol, warm, lp_solver=simplex.solve_lp)


class HighsBackend:
    """scipy's HiGHS; warm starts are accepted and ignored."""

    name = "highs"

    def __init__(self):
        from scipy import optimize  # noqa: F401  (fail early when scipy is missing)

    @staticmethod
    def _bounds(lp):
        lo = [None if not np.isfinite(v) else v for v in lp.lower]
        hi = [None if not np.isfinite(v) else v for v in lp.upper]
        return list(zip(lo, hi))

    def solve_lp(self, lp, tol=DEFAULT_TOLERANCES, warm=None):
        from scipy.optimize import linprog

        sign = -1.0 if lp.maximize else 1.0
        res = linprog(
            sign * lp.c,
            A_ub=lp.A_ub if lp.num_ub else None, b_ub=lp.b_ub if lp.num_ub else None,
            A_eq=lp.A_eq if lp.num_eq else None, b_eq=lp.b_eq if lp.num_eq else None,
            bounds=self._bounds(lp), method="highs",
            options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
        )
        if res.status == 2:
            return SolverSolution(status=Status.INFEASIBLE)
        if res.status == 3:
            return SolverSolution(status=Status.UNBOUNDED)
        if res.status != 0:
            return SolverSolution(status=Status.ITERATION_LIMIT)
        duals = np.concatenate([
            res.ineqlin.marginals if lp.num_ub else np.zeros(0),
            res.eqlin.marginals if lp.num_eq else np.zeros(0),
        ])
        x = np.asarray(res.x)
        return SolverSolution(
            status=Status.OPTIMAL, x=x, objective=float(lp.c @ x), duals=sign * duals,
            iterations=int(getattr(res, "nit", 0)),
        )

    def solve_milp(self, p, tol=DEFAULT_TOLERANCES, warm=None):
        from scipy.optimize import Bounds, LinearConstraint, milp

        lp = p.lp
        sign = -1.0 if lp.maximize else 1.0
        cons = []
        if lp.num_ub:
            cons.append(LinearConstraint(lp.A_ub, -np.inf, lp.b_ub))
        if lp.num_eq:
            cons.append(LinearConstraint(lp.A_eq, lp.b_eq, lp.b_eq))
        integrality = np.zeros(lp.num_vars)
        integrality[p.binaries] = 1
        res = milp(sign * lp.c, constraints=cons, integrality=integrality,
                   bounds=Bounds(lp.lower, lp.upper),
                   options={"mip_rel_gap": 0.0, "presolve": True})
        if res.status == 2 or res.x is None and res.status != 0:
            status = Status.INFEASIBLE if res.status == 2 else Status.ITERATION_LIMIT
            return SolverSolution(status=status)
        x = np.asarray(res.x)
        x[p.binaries] = np.round(x[p.binaries])
        return SolverSolution(status=Status.OPTIMAL, x=x, objective=float(lp.c @ x), gap=0.0)


_BACKENDS = {"bundled": BundledBackend, "highs": HighsBackend}


def get_backend(name: str | Backend | None = None) -> Backend:
    if name is None:
        return BundledBackend()
    if not isinstance(name, str):
        return name
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}") from None
