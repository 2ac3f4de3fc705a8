"""Distributionally robust flexibility: the largest box scale whose worst-case
expected violation, over distributions on the box with mean ``d_bar``, stays
within ``beta``.

The loop alternates a linear master in ``(lam, gamma, w)``, where ``w``
stands for the product ``lam * gamma`` relaxed by McCormick envelopes over
``gamma in [-K, K]``, with the 0/1 separation problem at the master's point.
Every cut involves ``lam`` and ``w`` only, and the envelopes project onto
exactly ``|w| <= lam * K``; so ``gamma = w / lam`` is a point of the
bilinear master with the same cut values and it is the hedge handed to the
separation step (``DroOptions.gamma_from_w``).
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .deterministic import AssessmentResult
from .dispatch import DispatchMatrices, evaluate_phi, phi_duals
from .lp import LinearProgram, Status, solve_lp
from .network import Hyperbox
from .separation import SeparationModel, cut_terms, separation_model

log = logging.getLogger(__name__)


class GammaBoundWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DroCut:
    z_plus: np.ndarray
    mu_star: np.ndarray
    nu_a_star: np.ndarray
    nu_b_star: np.ndarray
    lambda_coeff_from_duals: float
    w_coeff: np.ndarray
    constant: float

    def value(self, lam: float, w) -> float:
        return self.constant + lam * self.lambda_coeff_from_duals + float(self.w_coeff @ np.asarray(w))


@dataclass(frozen=True)
class DroOptions:
    beta: float = 0.05
    K: float = 100.0
    tolerance: float = 1e-6
    max_iter: int = 30
    gamma_from_w: bool = True
    certify: bool = True
    refresh_cuts: bool = True
    neighbor_cuts: bool = True

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.K <= 0:
            raise ValueError("K must be > 0")


@dataclass(frozen=True)
class MasterSolution:
    lam: float
    gamma: np.ndarray
    w: np.ndarray
    gamma_lp: np.ndarray    # the LP's own gamma before recovery
    diagnostic: Optional[str] = None


def make_cut(m: DispatchMatrices, box: Hyperbox, z_plus, mu, nu_a, nu_b) -> DroCut:
    constant, lam_coeff, w_coeff = cut_terms(m, box, z_plus, mu, nu_a - nu_b)
    return DroCut(np.asarray(z_plus).copy(), mu.copy(), nu_a.copy(), nu_b.copy(),
                  lam_coeff, w_coeff, constant)


def _master_lp(cuts, K, beta, N):
    # variables: lam, gamma[N], w[N]
    nv = 1 + 2 * N
    G = slice(1, 1 + N)
    W = slice(1 + N, 1 + 2 * N)
    rows, rhs = [], []
    for c in cuts:
        a = np.zeros(nv)
        a[0] = c.lambda_coeff_from_duals
        a[W] = c.w_coeff
        rows.append(a)
        rhs.append(beta - c.constant)
    eye = np.eye(N)
    for n in range(N):
        for coef_lam, coef_g, coef_w, r in ((-K, 0.0, -1.0, 0.0),    # w >= -lam K
                                            (K, 1.0, -1.0, K),       # w >= gamma + lam K - K
                                            (-K, -1.0, 1.0, K),      # w <= gamma - lam K + K
                                            (-K, 0.0, 1.0, 0.0)):    # w <= lam K
            a = np.zeros(nv)
            a[0] = coef_lam
            a[G] = coef_g * eye[n]
            a[W] = coef_w * eye[n]
            rows.append(a)
            rhs.append(r)
    lower = np.concatenate([[0.0], np.full(N, -K), np.full(N, -np.inf)])
    upper = np.concatenate([[1.0], np.full(N, K), np.full(N, np.inf)])
    return np.array(rows).reshape(-1, nv), np.array(rhs), lower, upper


def solve_dro_master(cuts: list[DroCut], K: float, beta: float, n_bus: int,
                     gamma_from_w: bool = True) -> MasterSolution:
    """max lam over the cuts and the envelopes of ``w = lam * gamma``.

    Among maximizers the one with the smallest ``sum |w|`` is taken, so the
    hedge stays as small as the cuts allow.
    """
    N = n_bus
    if not cuts:
        z = np.zeros(N)
        return MasterSolution(1.0, z, z.copy(), z.copy())
    A, b, lo, up = _master_lp(cuts, K, beta, N)
    nv = A.shape[1]
    c = np.zeros(nv)
    c[0] = 1.0
    sol = solve_lp(LinearProgram(c, A, b, lower=lo, upper=up, maximize=True))
    if sol.status is Status.INFEASIBLE:
        z = np.zeros(N)
        return MasterSolution(0.0, z, z.copy(), z.copy(),
                              "master infeasible: even the degenerate box exceeds beta")
    if not sol.optimal:
        raise RuntimeError(f"master LP ended with status {sol.status.value}")
    lam = float(sol.x[0])
    x = sol.x

    # second stage: fix lam, minimize sum |w| with t >= |w|
    A2 = np.hstack([A, np.zeros((A.shape[0], N))])
    W = slice(1 + N, 1 + 2 * N)
    abs_rows = np.zeros((2 * N, nv + N))
    abs_rows[:N, W] = np.eye(N)
    abs_rows[:N, nv:] = -np.eye(N)
    abs_rows[N:, W] = -np.eye(N)
    abs_rows[N:, nv:] = -np.eye(N)
    lo2 = np.concatenate([lo, np.zeros(N)])
    up2 = np.concatenate([up, np.full(N, np.inf)])
    lo2[0] = up2[0] = lam
    c2 = np.concatenate([np.zeros(nv), np.ones(N)])
    sol2 = solve_lp(LinearProgram(c2, np.vstack([A2, abs_rows]), np.concatenate([b, np.zeros(2 * N)]),
                                  lower=lo2, upper=up2), warm=None)
    if sol2.optimal:
        x = sol2.x[:nv]
    gamma_lp = x[1:1 + N].copy()
    w = x[1 + N:].copy()
    if gamma_from_w:
        gamma = w / lam if lam > 1e-12 else np.zeros(N)
        gamma = np.clip(gamma, -K, K)
    else:
        gamma = gamma_lp.copy()
    return MasterSolution(lam, gamma, w, gamma_lp)


def refreshed_cuts(m: DispatchMatrices, box: Hyperbox, cuts: list[DroCut], lam: float, w,
                   beta: float, skip=None) -> list[DroCut]:
    """Re-linearize the vertices of the cuts binding at ``(lam, w)``.

    A cut is a tangent of the vertex violation taken at the ``lam`` that
    produced it. Those binding at the new master point are re-taken there from
    a plain LP on the vertex; any that come out tighter are returned.
    """
    out, seen = [], set()
    if skip is not None:
        seen.add(np.asarray(skip).tobytes())
    margin = 1e-7 * (1.0 + abs(beta))
    for c in cuts:
        key = c.z_plus.tobytes()
        if key in seen or c.value(lam, w) < beta - margin:
            continue
        seen.add(key)
        _, mu, nu = phi_duals(m, box.vertex(lam, 2.0 * c.z_plus - 1.0))
        fresh = make_cut(m, box, c.z_plus, mu, np.minimum(nu, 0.0), np.minimum(-nu, 0.0))
        if fresh.value(lam, w) > c.value(lam, w) + margin:
            out.append(fresh)
    return out


def neighbor_cuts(m: DispatchMatrices, box: Hyperbox, z_plus, lam: float, w,
                  beta: float) -> list[DroCut]:
    """Cuts at the vertices one sign flip away from ``z_plus`` that are
    violated at ``(lam, w)``."""
    out = []
    margin = 1e-7 * (1.0 + abs(beta))
    for n in np.flatnonzero(box.delta_d > 0):
        z = np.asarray(z_plus, dtype=float).copy()
        z[n] = 1.0 - z[n]
        _, mu, nu = phi_duals(m, box.vertex(lam, 2.0 * z - 1.0))
        cut = make_cut(m, box, z, mu, np.minimum(nu, 0.0), np.minimum(-nu, 0.0))
        if cut.value(lam, w) > beta + margin:
            out.append(cut)
    return out


def solve_dro_subproblem(m: DispatchMatrices, box: Hyperbox, lam: float, gamma,
                         backend=None) -> tuple[float, DroCut]:
    """psi and the cut built from the maximizing vertex pattern and duals."""
    sep = separation_model(m, box, backend).solve(lam, gamma)
    return sep.psi, make_cut(m, box, sep.z_plus, sep.mu, sep.nu_a, sep.nu_b)


def assess_stochastic(m: DispatchMatrices, box: Hyperbox, opts: DroOptions = DroOptions(),
                      backend=None) -> AssessmentResult:
    t0 = time.perf_counter()
    res = AssessmentResult(0.0, False, 0)
    N = box.size

    def done():
        res.wall_time_ms = (time.perf_counter() - t0) * 1e3
        return res

    nominal = evaluate_phi(m, box.d_bar)
    if nominal > opts.beta + opts.tolerance:
        res.converged = True
        res.diagnostic = f"nominal violation {nominal:.6g} exceeds beta"
        return done()

    model = separation_model(m, box, backend)
    cuts: list[DroCut] = []
    best = None
    for it in range(1, opts.max_iter + 1):
        ms = solve_dro_master(cuts, opts.K, opts.beta, N, opts.gamma_from_w)
        if ms.diagnostic:
            res.diagnostic = ms.diagnostic
        lam, gamma = ms.lam, ms.gamma
        sep = model.solve(lam, gamma)
        res.iterations = it
        psi = sep.psi if np.isfinite(sep.psi) else sep.bound
        check = float(box.d_bar @ gamma) + psi
        res.subproblem_values.append(psi)
        res.trace.append({"iteration": it, "lambda": lam, "gamma_norm": float(np.max(np.abs(gamma), initial=0.0)),
                          "psi": psi, "check": check, "gamma": gamma.copy()})
        log.debug("sto iter %d lambda=%.9g |gamma|=%.4g psi=%.9g check=%.9g", it, lam,
                  np.max(np.abs(gamma), initial=0.0), psi, check)
        passed = check <= opts.beta + opts.tolerance
        if not sep.exact:
            passed = float(box.d_bar @ gamma) + sep.bound <= opts.beta + opts.tolerance
        if passed:
            best = lam if best is None else max(best, lam)
            res.lambda_star = lam
            res.gamma = gamma.copy()
            res.converged = True
            break
        cut = make_cut(m, box, sep.z_plus, sep.mu, sep.nu_a, sep.nu_b)
        if opts.refresh_cuts:
            extra = refreshed_cuts(m, box, cuts, lam, ms.w, opts.beta, skip=sep.z_plus)
            cuts.extend(extra)
            res.extra_cuts += len(extra)
        if opts.neighbor_cuts:
            extra = neighbor_cuts(m, box, sep.z_plus, lam, ms.w, opts.beta)
            cuts.extend(extra)
            res.extra_cuts += len(extra)
        cuts.append(cut)
        res.cuts.append(cut)

    if not res.converged:
        res.lambda_star = 0.0 if best is None else best
        res.diagnostic = f"check not met within {opts.max_iter} iterations"
        return done()

    if np.max(np.abs(res.gamma), initial=0.0) > 0.99 * opts.K:
        msg = f"hedge vector reached {np.max(np.abs(res.gamma)):.4g}, near the bound K={opts.K}; raise K"
        res.warnings.append(msg)
        warnings.warn(msg, GammaBoundWarning, stacklevel=2)
    if opts.certify:
        fresh = SeparationModel(m, box, backend=backend)
        again = fresh.solve(res.lambda_star, res.gamma)
        res.certified = bool(box.d_bar @ res.gamma + again.psi <= opts.beta + 1e-5)
        if not res.certified:
            res.warnings.append("independent re-solve does not confirm the check")
    return done()
