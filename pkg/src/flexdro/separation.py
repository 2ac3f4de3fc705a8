"""Worst-vertex separation problem shared by both assessments.

For a box ``U(lam) = d_bar +/- lam * delta_d`` and a hedge vector ``gamma``
the problem is

    psi = max_{s in {-1,1}^N, (mu, nu) dual feasible}
            (h1 + H1 xi_s).mu + (h2 + H2 xi_s).nu - xi_s.gamma,
    xi_s = d_bar + lam * delta_d * s,

written as a mixed 0/1 program: ``z`` (= 1 where ``s = +1``) is binary, ``nu``
is split as ``nu_a - nu_b`` with both parts nonpositive, and every product of a
binary with a dual variable gets its own variable tied down by four-inequality
envelopes (exact at binary ``z``). The constraint matrix does not depend on
``lam`` or ``gamma``; only the objective does, so one model serves every call
and the root basis of each solve warm-starts the next.

Rows that are strictly slack at every optimal dispatch for every net load in
``U(1)`` have ``mu = 0`` in every optimal dual (complementary slackness); the
model fixes those multipliers at zero and omits their products. The proof
needs only an upper bound on the violation over ``U(1)`` (from a reference
dispatch) and the resulting implied bounds on each variable.

Buses whose load columns agree on every kept row see the same dual
sensitivity ``g``; for fixed duals the best sign at such a bus is
``sign(g - gamma_n)``, so within the group the buses sorted by ``gamma`` take
``+1`` on a prefix and ``-1`` on the rest. Chaining their binaries in that
order (equal where ``gamma`` ties) keeps the optimum and shrinks the search
from ``2^k`` to ``k + 1`` patterns per group.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import DispatchMatrices
from .lp import (DEFAULT_TOLERANCES, LinearProgram, MixedBinaryProgram, Status, Tolerances,
                 get_backend)
from .lp.backends import BundledBackend
from .network import Hyperbox


@dataclass
class SeparationResult:
    psi: float
    z_plus: np.ndarray
    mu: np.ndarray
    nu_a: np.ndarray
    nu_b: np.ndarray
    status: Status
    bound: float
    nodes: int
    iterations: int

    @property
    def signs(self) -> np.ndarray:
        return 2.0 * self.z_plus - 1.0

    @property
    def nu(self) -> np.ndarray:
        return self.nu_a - self.nu_b

    @property
    def exact(self) -> bool:
        return self.status is Status.OPTIMAL


def cut_terms(m: DispatchMatrices, box: Hyperbox, z_plus, mu, nu):
    """Split a vertex/dual pair into ``constant + lam * lam_coeff + w_coeff . w``
    where ``w = lam * gamma``; the value equals ``d_bar.gamma + psi``."""
    signs = 2.0 * np.asarray(z_plus, dtype=float) - 1.0
    g = m.H1.T @ mu + m.H2.T @ nu             # sensitivity to each bus load
    constant = float(m.h1 @ mu + m.h2 @ nu + box.d_bar @ g)
    lam_coeff = float(np.sum(box.delta_d * signs * g))
    w_coeff = -box.delta_d * signs
    return constant, lam_coeff, w_coeff


def violation_bound(m: DispatchMatrices, box: Hyperbox, y_ref=None) -> float:
    """Upper bound on phi over ``U(1)``: the slack a fixed dispatch needs at
    the worst net load for each row separately."""
    y = np.zeros(m.n_vars) if y_ref is None else np.asarray(y_ref, dtype=float)
    lo1 = m.h1 + m.H1 @ box.d_bar - np.abs(m.H1) @ box.delta_d
    total = float(m.w1 @ np.maximum(0.0, m.A1 @ y - lo1))
    act2 = m.A2 @ y
    mid2 = m.h2 + m.H2 @ box.d_bar
    spread2 = np.abs(m.H2) @ box.delta_d
    short = np.maximum(0.0, mid2 + spread2 - act2)
    excess = np.maximum(0.0, act2 - (mid2 - spread2))
    total += float(np.sum(np.maximum(m.w_plus * short, m.w_minus * excess)))
    return total


def screen_rows(m: DispatchMatrices, box: Hyperbox, y_ref=None) -> np.ndarray:
    """Boolean mask of inequality rows whose multiplier must be zero."""
    M1, V = m.A1.shape
    phi_max = violation_bound(m, box, y_ref)
    hi1 = m.h1 + m.H1 @ box.d_bar + np.abs(m.H1) @ box.delta_d
    lo1 = m.h1 + m.H1 @ box.d_bar - np.abs(m.H1) @ box.delta_d
    ub = np.full(V, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(M1):
            row = m.A1[i]
            nz = np.flatnonzero(row)
            if nz.size == 1 and row[nz[0]] > 0 and m.w1[i] > 0:
                j = nz[0]
                ub[j] = min(ub[j], (hi1[i] + phi_max / m.w1[i]) / row[j])
        hi2 = m.h2 + m.H2 @ box.d_bar + np.abs(m.H2) @ box.delta_d
        for k in range(m.n_eq):
            row = m.A2[k]
            if np.all(row >= 0) and m.w_minus[k] > 0:
                cap = hi2[k] + phi_max / m.w_minus[k]
                pos = row > 0
                ub[pos] = np.minimum(ub[pos], cap / row[pos])
    ub = np.maximum(ub, 0.0)
    screened = np.zeros(M1, dtype=bool)
    for i in range(M1):
        row = m.A1[i]
        pos = row > 0
        if np.any(~np.isfinite(ub[pos])):
            continue
        max_act = float(row[pos] @ ub[pos])
        margin = 1e-7 * (1.0 + abs(lo1[i]))
        screened[i] = max_act < lo1[i] - margin
    return screened


class SeparationModel:
    def __init__(self, m: DispatchMatrices, box: Hyperbox, screen: bool = True,
                 full_envelopes: bool = False, chains: bool = True,
                 tol: Tolerances = DEFAULT_TOLERANCES, backend=None):
        if box.size != m.n_bus:
            raise ValueError("hyperbox dimension does not match the bus count")
        self.m, self.box, self.tol = m, box, tol
        self.backend = get_backend(backend)
        M1, M2, V, N = m.n_ineq, m.n_eq, m.n_vars, m.n_bus
        self.screened = screen_rows(m, box, m.y_nominal) if screen else np.zeros(M1, dtype=bool)
        rows_kept = np.flatnonzero(~self.screened)
        self.rows_kept = rows_kept
        self.buses = np.flatnonzero(box.delta_d > 0)

        names = []
        lower, upper = [], []

        def var(name, lo, hi):
            names.append(name)
            lower.append(lo)
            upper.append(hi)
            return len(names) - 1

        self.mu_idx = np.array([var(f"mu[{i}]", -m.w1[i], 0.0) for i in rows_kept], dtype=np.int64)
        self.nua_idx = np.array([var(f"nua[{k}]", -m.w_minus[k], 0.0) for k in range(M2)], dtype=np.int64)
        self.nub_idx = np.array([var(f"nub[{k}]", -m.w_plus[k], 0.0) for k in range(M2)], dtype=np.int64)
        self.z_idx = np.array([var(f"z[{n}]", 0.0, 1.0) for n in self.buses], dtype=np.int64)

        # products: (index of product var, underlying var, its bound W, bus pos, +1/-1 for z or 1-z,
        #            objective weight per unit lam)
        prods = []
        for r, i in enumerate(rows_kept):
            for p, n in enumerate(self.buses):
                coef = m.H1[i, n] * box.delta_d[n]
                if coef == 0.0:
                    continue
                W = m.w1[i]
                base = self.mu_idx[r]
                prods.append((var(f"muhat+[{i},{n}]", -W, 0.0), base, W, p, +1, coef))
                prods.append((var(f"muhat-[{i},{n}]", -W, 0.0), base, W, p, -1, -coef))
        for k in range(M2):
            for p, n in enumerate(self.buses):
                coef = m.H2[k, n] * box.delta_d[n]
                if coef == 0.0:
                    continue
                for tag, base, W, sgn in (("a", self.nua_idx[k], m.w_minus[k], 1.0),
                                          ("b", self.nub_idx[k], m.w_plus[k], -1.0)):
                    prods.append((var(f"nu{tag}hat+[{k},{n}]", -W, 0.0), base, W, p, +1, sgn * coef))
                    prods.append((var(f"nu{tag}hat-[{k},{n}]", -W, 0.0), base, W, p, -1, -sgn * coef))
        self.n_products = len(prods)
        nv = len(names)

        rows = []
        rhs = []
        # dual feasibility A1' mu + A2' (nu_a - nu_b) <= 0
        for j in range(V):
            a = np.zeros(nv)
            a[self.mu_idx] = m.A1[rows_kept, j]
            a[self.nua_idx] = m.A2[:, j]
            a[self.nub_idx] = -m.A2[:, j]
            rows.append(a)
            rhs.append(0.0)
        for (pi, base, W, p, side, coef) in prods:
            zi = self.z_idx[p]
            # lower envelope: p >= -W z (or -W (1 - z)) and p >= x
            # upper envelope: p <= x + W (1 - z) (or x + W z); p <= 0 is a bound
            lower_rows = [((pi, -1.0), (zi, -W if side > 0 else W), 0.0 if side > 0 else W),
                          ((base, 1.0), (pi, -1.0), 0.0)]
            upper_rows = [((pi, 1.0), (base, -1.0), (zi, W if side > 0 else -W), W if side > 0 else 0.0)]
            # maximizing presses a product with a positive coefficient only
            # against its upper envelope and a negative one only against its
            # lower envelope; the other half never binds
            if full_envelopes:
                chosen = lower_rows + upper_rows
            else:
                chosen = upper_rows if coef > 0 else lower_rows
            for spec in chosen:
                a = np.zeros(nv)
                for idx, v in spec[:-1]:
                    a[idx] += v
                rows.append(a)
                rhs.append(spec[-1])

        self._prod_var = np.array([pr[0] for pr in prods], dtype=np.int64)
        self._prod_coef = np.array([pr[5] for pr in prods], dtype=float)
        self.lp = LinearProgram(np.zeros(nv), np.array(rows).reshape(-1, nv), np.array(rhs),
                                lower=np.array(lower), upper=np.array(upper), maximize=True,
                                col_names=names)
        self.program = MixedBinaryProgram(self.lp, self.z_idx)
        self.groups = _identical_columns(np.vstack([m.H1[rows_kept], m.H2])[:, self.buses]) if chains else []
        self._chain_key = None
        self._base_obj = np.zeros(nv)
        b1 = m.h1 + m.H1 @ box.d_bar
        b2 = m.h2 + m.H2 @ box.d_bar
        self._base_obj[self.mu_idx] = b1[rows_kept]
        self._base_obj[self.nua_idx] = b2
        self._base_obj[self.nub_idx] = -b2
        self._basis = None

    def objective(self, lam: float, gamma) -> tuple[np.ndarray, float]:
        gamma = np.asarray(gamma, dtype=float)
        c = self._base_obj.copy()
        c[self._prod_var] += lam * self._prod_coef
        dd = self.box.delta_d
        c[self.z_idx] += -2.0 * lam * dd[self.buses] * gamma[self.buses]
        const = float(-self.box.d_bar @ gamma + lam * dd @ gamma)
        return c, const

    def chain_pairs(self, gamma) -> tuple:
        """``(hi, lo)`` pairs of binary positions with ``z[lo] <= z[hi]``."""
        g = np.asarray(gamma, dtype=float)[self.buses]
        pairs = []
        for grp in self.groups:
            order = sorted(grp, key=lambda p: (g[p], p))
            for a, b in zip(order, order[1:]):
                pairs.append((a, b))
                if g[a] == g[b]:
                    pairs.append((b, a))
        return tuple(pairs)

    def problem(self, lam: float, gamma=None) -> MixedBinaryProgram:
        """The 0/1 program for one (lam, gamma); its optimum plus
        ``objective(lam, gamma)[1]`` is psi."""
        gamma = np.zeros(self.m.n_bus) if gamma is None else gamma
        c, _ = self.objective(lam, gamma)
        A, b = self.lp.A_ub, self.lp.b_ub
        pairs = self.chain_pairs(gamma)
        if pairs:
            extra = np.zeros((len(pairs), A.shape[1]))
            for r, (hi, lo) in enumerate(pairs):
                extra[r, self.z_idx[lo]] = 1.0
                extra[r, self.z_idx[hi]] = -1.0
            A = np.vstack([A, extra])
            b = np.concatenate([b, np.zeros(len(pairs))])
        lp = LinearProgram(c, A, b, lower=self.lp.lower, upper=self.lp.upper,
                           maximize=True, col_names=self.lp.col_names)
        return MixedBinaryProgram(lp, self.z_idx)

    def solve(self, lam: float, gamma=None) -> SeparationResult:
        if not (0.0 <= lam <= 1.0):
            raise ValueError("lambda must lie in [0, 1]")
        N = self.m.n_bus
        gamma = np.zeros(N) if gamma is None else np.asarray(gamma, dtype=float)
        if not np.all(np.isfinite(gamma)):
            raise ValueError("gamma must be finite")
        _, const = self.objective(lam, gamma)
        prob = self.problem(lam, gamma)
        key = self.chain_pairs(gamma)
        if key != self._chain_key:
            # the chain rows changed, so the stored basis belongs to another matrix
            self._basis, self._chain_key = None, key
        if isinstance(self.backend, BundledBackend):
            sol = self.backend.solve_milp(prob, self.tol, self._basis)
            if sol.basis is not None:
                self._basis = sol.basis
        else:
            sol = self.backend.solve_milp(prob, self.tol)
        z = np.ones(N)
        mu = np.zeros(self.m.n_ineq)
        M2 = self.m.n_eq
        if sol.x is None:
            bound = np.inf if sol.bound is None else sol.bound + const
            return SeparationResult(np.nan, z, mu, np.zeros(M2), np.zeros(M2), sol.status,
                                    bound, sol.nodes, sol.iterations)
        x = sol.x
        z[self.buses] = np.round(x[self.z_idx])
        mu[self.rows_kept] = x[self.mu_idx]
        psi = float(sol.objective) + const
        bound = psi if sol.bound is None else float(sol.bound) + const
        return SeparationResult(psi, z, mu, x[self.nua_idx].copy(), x[self.nub_idx].copy(),
                                sol.status, bound, sol.nodes, sol.iterations)


def _identical_columns(H: np.ndarray) -> list[list[int]]:
    """Groups (size >= 2) of column positions with equal entries."""
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    keys = {}
    for p in range(H.shape[1]):
        keys.setdefault(tuple(np.round(H[:, p] / scale, 12)), []).append(p)
    return [g for g in keys.values() if len(g) > 1]


def separation_model(m: DispatchMatrices, box: Hyperbox, backend=None) -> SeparationModel:
    """Cached model per (matrices, box, backend)."""
    key = ("separation", box.d_bar.tobytes(), box.delta_d.tobytes(),
           None if backend is None else getattr(backend, "name", backend))
    model = m._cache.get(key)
    if model is None:
        model = m._cache[key] = SeparationModel(m, box, backend=backend)
    return model
