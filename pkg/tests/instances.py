"""Random LP/MILP instances and brute-force references that avoid the kernel."""
import itertools

import numpy as np
from scipy.optimize import linprog

from flexdro.lp import LinearProgram, MixedBinaryProgram


def random_lp(rng, n=None, m_ub=None, m_eq=None, free=True, maximize=None) -> LinearProgram:
    """Feasible and bounded by construction.

    A known interior-ish point fixes feasibility; the cost is built from a
    dual-feasible point so weak duality bounds the objective.
    """
    n = n or int(rng.integers(2, 12))
    m_ub = int(rng.integers(1, 10)) if m_ub is None else m_ub
    m_eq = int(rng.integers(0, max(1, n // 2))) if m_eq is None else m_eq
    kind = rng.choice(["lower", "box", "free"] if free else ["lower", "box"], size=n, p=None)
    lo = np.where(kind == "free", -np.inf, np.round(rng.uniform(-3, 1, n), 3))
    up = np.where(kind == "box", lo + np.round(rng.uniform(0.5, 6, n), 3), np.inf)
    base = np.where(np.isfinite(lo), lo, 0.0)
    width = np.where(kind == "box", up - lo, 1.0)
    x0 = np.where(kind == "box", base + rng.uniform(0, 1, n) * width,
                  np.where(kind == "free", rng.normal(0, 2, n), base + rng.exponential(1.0, n)))
    A_ub = np.round(rng.normal(0, 1, (m_ub, n)), 3)
    A_eq = np.round(rng.normal(0, 1, (m_eq, n)), 3)
    b_ub = A_ub @ x0 + np.round(rng.uniform(0, 2, m_ub), 3)
    b_eq = A_eq @ x0
    y = rng.exponential(1.0, m_ub) * (rng.random(m_ub) < 0.7)
    v = rng.normal(0, 1, m_eq)
    r = np.where(kind == "free", 0.0, np.where(kind == "lower", rng.exponential(1.0, n), rng.normal(0, 1, n)))
    c = -A_ub.T @ y + A_eq.T @ v + r
    if maximize is None:
        maximize = bool(rng.random() < 0.3)
    if maximize:
        c = -c
    return LinearProgram(c, A_ub, b_ub, A_eq, b_eq, lo, up, maximize=maximize)


def highs_lp(lp: LinearProgram):
    """(objective, x) from scipy's HiGHS, or (None, None) if not optimal."""
    sign = -1.0 if lp.maximize else 1.0
    res = linprog(sign * lp.c, A_ub=lp.A_ub if lp.num_ub else None, b_ub=lp.b_ub if lp.num_ub else None,
                  A_eq=lp.A_eq if lp.num_eq else None, b_eq=lp.b_eq if lp.num_eq else None,
                  bounds=[(None if not np.isfinite(a) else a, None if not np.isfinite(b) else b)
                          for a, b in zip(lp.lower, lp.upper)],
                  method="highs")
    if res.status != 0:
        return None, None
    return float(lp.c @ res.x), res.x


def vertex_enumeration(lp: LinearProgram) -> float:
    """Optimum over basic solutions; for pointed feasible bounded problems."""
    n = lp.num_vars
    rows, rhs = [lp.A_ub], [lp.b_ub]
    fin_lo, fin_up = np.isfinite(lp.lower), np.isfinite(lp.upper)
    rows += [-np.eye(n)[fin_lo], np.eye(n)[fin_up]]
    rhs += [-lp.lower[fin_lo], lp.upper[fin_up]]
    G, g = np.vstack(rows), np.concatenate(rhs)
    best = None
    sense = -1.0 if lp.maximize else 1.0
    need = n - lp.num_eq
    for subset in itertools.combinations(range(G.shape[0]), need):
        M = np.vstack([lp.A_eq, G[list(subset)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.concatenate([lp.b_eq, g[list(subset)]]))
        if np.all(G @ x <= g + 1e-7):
            val = float(lp.c @ x)
            if best is None or sense * val < sense * best:
                best = val
    return best


def random_milp(rng, n_bin=None, n_cont=None, maximize=None) -> MixedBinaryProgram:
    """Binaries gate continuous columns; the all-zero point is always feasible."""
    k = n_bin if n_bin is not None else int(rng.integers(1, 13))
    n = n_cont if n_cont is not None else int(rng.integers(0, 6))
    m = int(rng.integers(2, 7))
    A = np.round(rng.normal(0, 1, (m, k + n)), 3)
    b = np.round(rng.uniform(0.5, 3, m), 3)
    gates = []
    for j in range(n):
        i = int(rng.integers(0, k))
        row = np.zeros(k + n)
        row[k + j] = 1.0
        row[i] = -float(np.round(rng.uniform(1, 4), 3))
        gates.append(row)
    if gates:
        A = np.vstack([A, gates])
        b = np.concatenate([b, np.zeros(n)])
    c = np.round(rng.normal(0, 1, k + n), 3)
    if maximize is None:
        maximize = bool(rng.random() < 0.5)
    upper = np.concatenate([np.ones(k), np.full(n, 5.0)])
    lp = LinearProgram(c, A, b, lower=np.zeros(k + n), upper=upper, maximize=maximize)
    return MixedBinaryProgram(lp, np.arange(k))


def enumerate_milp(p: MixedBinaryProgram) -> float:
    """Best objective over all binary patterns, each completed by an LP."""
    lp = p.lp
    k = p.binaries.size
    best = None
    sense = -1.0 if lp.maximize else 1.0
    for pattern in itertools.product((0.0, 1.0), repeat=k):
        lo, up = lp.lower.copy(), lp.upper.copy()
        lo[p.binaries] = pattern
        up[p.binaries] = pattern
        val, _ = highs_lp(lp.with_bounds(lo, up))
        if val is not None and (best is None or sense * val < sense * best):
            best = val
    return best
