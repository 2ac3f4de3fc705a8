"""Brute-force references for small systems.

Everything here goes through ``evaluate_phi`` and a plain LP over vertex
weights; nothing from the cutting-plane code is used.
"""
from __future__ import annotations

import itertools

import numpy as np

from .dispatch import DispatchMatrices, evaluate_phi
from .lp import LinearProgram, solve_lp
from .network import Hyperbox

MAX_DET_BUSES = 20
MAX_STO_BUSES = 12


def _patterns(n: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n))).reshape(2 ** n, n)


def _active(box: Hyperbox, limit: int) -> np.ndarray:
    """Buses with a nonzero deviation; only those generate distinct vertices."""
    idx = np.flatnonzero(box.delta_d > 0)
    if idx.size > limit:
        raise ValueError(f"brute force over {idx.size} uncertain buses exceeds the limit of {limit}")
    return idx


def enumerate_vertex_phis(m: DispatchMatrices, box: Hyperbox, lam: float,
                          limit: int = MAX_DET_BUSES) -> list[tuple[np.ndarray, float]]:
    """``(s, phi(d_bar + lam * delta_d * s))`` for every sign pattern ``s``.

    Buses without deviation keep ``s = +1``; they do not move the vertex.
    """
    if box.size > limit:
        raise ValueError(f"{box.size} buses exceeds the enumeration limit of {limit}")
    idx = _active(box, limit)
    out = []
    for pat in _patterns(idx.size):
        s = np.ones(box.size)
        s[idx] = pat
        out.append((s, evaluate_phi(m, box.vertex(lam, s))))
    return out


def _bisect(pred, tol: float) -> float:
    """Largest lam in [0, 1] with ``pred(lam)`` true, for a predicate that is
    true on an interval starting at 0."""
    if pred(1.0):
        return 1.0
    if not pred(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_vertex_phi(m: DispatchMatrices, box: Hyperbox, lam: float) -> float:
    return max(v for _, v in enumerate_vertex_phis(m, box, lam))


def det_lambda_oracle(m: DispatchMatrices, box: Hyperbox, tol: float = 1e-6) -> float:
    """Largest lam whose every vertex is served without violation."""
    _active(box, MAX_DET_BUSES)
    if evaluate_phi(m, box.d_bar) > tol:
        return 0.0
    return _bisect(lambda lam: max_vertex_phi(m, box, lam) <= tol, tol)


def worst_expectation_oracle(m: DispatchMatrices, box: Hyperbox, lam: float) -> float:
    """Max of E[phi] over distributions on the vertices with mean ``d_bar``."""
    idx = _active(box, MAX_STO_BUSES)
    vals = enumerate_vertex_phis(m, box, lam, limit=max(MAX_DET_BUSES, box.size))
    phis = np.array([v for _, v in vals])
    S = np.array([s[idx] for s, _ in vals])        # vertices x active buses
    k = phis.shape[0]
    # sum p = 1 and sum p * s = 0 per bus (mean at the centre); the latter
    # does not depend on lam because every active deviation is positive
    A_eq = np.vstack([np.ones((1, k)), S.T])
    b_eq = np.concatenate([[1.0], np.zeros(idx.size)])
    sol = solve_lp(LinearProgram(phis, A_eq=A_eq, b_eq=b_eq, maximize=True))
    if not sol.optimal:
        raise RuntimeError(f"vertex-weight LP ended with status {sol.status.value}")
    return float(sol.objective)


def sto_lambda_oracle(m: DispatchMatrices, box: Hyperbox, beta: float, tol: float = 1e-6) -> float:
    """Largest lam whose worst-case expected violation stays within ``beta``."""
    _active(box, MAX_STO_BUSES)
    if evaluate_phi(m, box.d_bar) > beta + tol:
        return 0.0
    return _bisect(lambda lam: worst_expectation_oracle(m, box, lam) <= beta + tol, tol)
