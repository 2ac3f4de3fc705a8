"""Worst-case flexibility: the largest box scale with zero violation at every vertex."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dispatch import DispatchMatrices, evaluate_phi
from .network import Hyperbox
from .separation import SeparationResult, cut_terms, separation_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetCut:
    constant: float
    slope: float
    z_plus: np.ndarray

    def value(self, lam: float) -> float:
        return self.constant + lam * self.slope


@dataclass
class AssessmentResult:
    lambda_star: float
    converged: bool
    iterations: int
    cuts: list = field(default_factory=list)
    subproblem_values: list = field(default_factory=list)
    wall_time_ms: float = 0.0
    trace: list = field(default_factory=list)
    gamma: Optional[np.ndarray] = None
    diagnostic: Optional[str] = None
    warnings: list = field(default_factory=list)
    certified: Optional[bool] = None
    extra_cuts: int = 0

    def trace_csv(self) -> str:
        """Per-iteration trace as CSV (lambda, gamma norm, psi, check value)."""
        lines = ["iteration,lambda,gamma_norm,psi,check"]
        for t in self.trace:
            lines.append(f"{t['iteration']},{t['lambda']:.9g},{t['gamma_norm']:.9g},"
                         f"{t['psi']:.9g},{t['check']:.9g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DetOptions:
    tolerance: float = 1e-6
    max_iter: int = 30


def worst_case_violation(m: DispatchMatrices, box: Hyperbox, lam: float,
                         backend=None) -> SeparationResult:
    """Largest vertex violation over ``U(lam)`` with the maximizing pattern and
    duals (``result.psi``, ``result.z_plus``, ``result.mu``, ``result.nu``)."""
    return separation_model(m, box, backend).solve(lam, None)


def det_master(cuts: list[DetCut]) -> float:
    """max lam in [0, 1] subject to ``constant + lam * slope <= 0`` for all cuts."""
    lam = 1.0
    for c in cuts:
        if c.slope > 0:
            lam = min(lam, -c.constant / c.slope)
        elif c.constant > 0:
            return 0.0
    return min(1.0, max(0.0, lam))


def assess_deterministic(m: DispatchMatrices, box: Hyperbox, opts: DetOptions = DetOptions(),
                         backend=None) -> AssessmentResult:
    t0 = time.perf_counter()
    res = AssessmentResult(0.0, False, 0)

    def done():
        res.wall_time_ms = (time.perf_counter() - t0) * 1e3
        return res

    nominal = evaluate_phi(m, box.d_bar)
    if nominal > opts.tolerance:
        res.converged = True
        res.diagnostic = f"nominal net load already violates constraints (phi = {nominal:.6g})"
        return done()

    model = separation_model(m, box, backend)
    cuts: list[DetCut] = []
    for it in range(1, opts.max_iter + 1):
        lam = det_master(cuts)
        sep = model.solve(lam, None)
        res.iterations = it
        psi = sep.psi if np.isfinite(sep.psi) else sep.bound
        res.subproblem_values.append(psi)
        res.trace.append({"iteration": it, "lambda": lam, "gamma_norm": 0.0, "psi": psi, "check": psi})
        log.debug("det iter %d lambda=%.9g psi=%.9g", it, lam, psi)
        certified = sep.bound <= opts.tolerance if not sep.exact else psi <= opts.tolerance
        if certified:
            res.lambda_star = lam
            res.converged = True
            return done()
        c0, c1, _ = cut_terms(m, box, sep.z_plus, sep.mu, sep.nu)
        cuts.append(DetCut(c0, c1, sep.z_plus.copy()))
        res.cuts.append(cuts[-1])
    # master values only decrease, so no earlier probe passed
    res.lambda_star = 0.0
    res.diagnostic = f"no certified lambda within {opts.max_iter} iterations"
    return done()
