"""Best-bound branch-and-bound over LP relaxations for 0/1 variables."""
from __future__ import annotations

import heapq
import itertools
from typing import Callable

import numpy as np

from .model import DEFAULT_TOLERANCES, MixedBinaryProgram, SolverSolution, Status, Tolerances
from .simplex import Basis, PreparedLP, solve_lp

LpSolver = Callable[..., SolverSolution]


def solve_milp(p: MixedBinaryProgram, tol: Tolerances = DEFAULT_TOLERANCES,
               warm: Basis | None = None, lp_solver: LpSolver = solve_lp) -> SolverSolution:
    """Solve a mixed 0/1 program.

    Nodes are explored highest-bound first (in the maximization sense). The
    branching variable is the most fractional binary, ties broken by the
    lowest variable index. Each node's LP is warm-started from its parent's
    basis, and at every fractional node the rounded pattern is tried once as
    an incumbent heuristic. ``solution.basis`` is the root relaxation basis and
    can warm-start a later call on a problem with the same constraint matrix.
    """
    lp = p.lp
    bins = np.sort(p.binaries)
    if bins.size > tol.max_binaries:
        raise ValueError(f"{bins.size} binaries exceeds the cap of {tol.max_binaries}")
    sense = 1.0 if lp.maximize else -1.0

    if lp_solver is solve_lp:
        prepared = PreparedLP(lp)

        def node_solve(lo, hi, basis):
            return prepared.solve(tol, basis, lower=lo, upper=hi)
    else:
        def node_solve(lo, hi, basis):
            return lp_solver(lp.with_bounds(lo, hi), tol, basis)

    root = node_solve(lp.lower, lp.upper, warm)
    if root.status is Status.INFEASIBLE:
        return SolverSolution(status=Status.INFEASIBLE, iterations=root.iterations,
                              nodes=1, farkas=root.farkas)
    if root.status is not Status.OPTIMAL:
        return SolverSolution(status=root.status, iterations=root.iterations, nodes=1)
    root_basis = root.basis.copy() if root.basis is not None else None

    best_val = -np.inf
    best_x = None
    iterations = root.iterations
    nodes = 1
    tried: set = set()
    counter = itertools.count()

    def consider(sol: SolverSolution):
        nonlocal best_val, best_x
        val = sense * sol.objective
        if val > best_val:
            best_val = val
            x = sol.x.copy()
            x[bins] = np.round(x[bins])
            best_x = x

    def round_and_try(x, lower, upper, basis):
        nonlocal iterations
        pattern = tuple((x[bins] >= 0.5).astype(np.int8).tolist())
        if pattern in tried:
            return
        tried.add(pattern)
        lo = lower.copy()
        hi = upper.copy()
        lo[bins] = pattern
        hi[bins] = pattern
        if np.any(lo > hi):
            return
        sol = node_solve(lo, hi, basis)
        iterations += sol.iterations
        if sol.status is Status.OPTIMAL:
            consider(sol)

    heap: list = []
    keep_inverse_below = 256   # open nodes beyond this store bases without inverses

    def expand(sol: SolverSolution, lower, upper):
        xb = sol.x[bins]
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if np.all(frac <= tol.int_tol):
            consider(sol)
            return
        basis = sol.basis
        round_and_try(sol.x, lower, upper, basis)
        if basis is not None and len(heap) >= keep_inverse_below:
            basis = Basis(basis.basis, basis.state)
        k = int(np.argmax(frac))  # first maximal entry -> lowest index among ties
        j = bins[k]
        first = 1.0 if sol.x[j] >= 0.5 else 0.0
        bound = sense * sol.objective
        for v in (first, 1.0 - first):
            lo = lower.copy()
            hi = upper.copy()
            lo[j] = v
            hi[j] = v
            heapq.heappush(heap, (-bound, next(counter), lo, hi, basis))

    expand(root, lp.lower, lp.upper)
    status = Status.OPTIMAL
    while heap:
        neg_bound, _, lo, hi, basis = heap[0]
        if -neg_bound <= best_val + tol.mip_gap:
            break
        if nodes >= tol.max_nodes:
            status = Status.ITERATION_LIMIT
            break
        heapq.heappop(heap)
        sol = node_solve(lo, hi, basis)
        nodes += 1
        iterations += sol.iterations
        if sol.status is not Status.OPTIMAL:
            continue
        if sense * sol.objective <= best_val + tol.mip_gap:
            continue
        expand(sol, lo, hi)

    open_bound = max((-h[0] for h in heap), default=-np.inf)
    if best_x is None:
        if status is Status.OPTIMAL:
            return SolverSolution(status=Status.INFEASIBLE, iterations=iterations, nodes=nodes,
                                  basis=root_basis)
        return SolverSolution(status=status, iterations=iterations, nodes=nodes,
                              bound=sense * open_bound, basis=root_basis)
    bound = max(open_bound, best_val) if status is Status.ITERATION_LIMIT else best_val
    if status is Status.OPTIMAL and open_bound > best_val:
        bound = open_bound
    return SolverSolution(
        status=status,
        x=best_x,
        objective=float(lp.c @ best_x),
        iterations=iterations,
        nodes=nodes,
        gap=max(0.0, bound - best_val),
        bound=sense * bound,
        basis=root_basis,
    )
