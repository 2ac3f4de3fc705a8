"""Sequential real-time dispatch with a flexibility assessment per interval.

Each interval fixes the previous interval's nominal decisions, dispatches at
the forecast, then measures how far the net load can stray around the
forecast (or around each scenario's net load) before the interval breaks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .deterministic import AssessmentResult, DetOptions, assess_deterministic
from .dispatch import (DispatchConfig, DispatchInfeasible, IntervalState, build_matrices,
                       budget_from_cost, solve_nominal_dispatch, startup_state)
from .network import Hyperbox, Network, deviation_for
from .stochastic import DroOptions, assess_stochastic

log = logging.getLogger(__name__)

MODES = ("det", "sto", "both")
OUTLIER_MULTIPLIER = 1.09
SCENARIO_RANGE = (0.99, 1.01)


@dataclass(frozen=True)
class ScenarioSet:
    multipliers: np.ndarray        # scenarios x intervals
    seed: Optional[int] = None
    outlier_included: bool = False

    def __post_init__(self):
        mult = np.asarray(self.multipliers, dtype=float)
        if mult.ndim != 2 or mult.shape[0] < 1:
            raise ValueError("multipliers must be a nonempty scenarios x intervals matrix")
        if np.any(mult <= 0) or not np.all(np.isfinite(mult)):
            raise ValueError("multipliers must be positive and finite")
        object.__setattr__(self, "multipliers", mult)

    @property
    def count(self) -> int:
        return self.multipliers.shape[0]

    @property
    def intervals(self) -> int:
        return self.multipliers.shape[1]

    def without(self, index: int) -> "ScenarioSet":
        keep = np.delete(self.multipliers, index, axis=0)
        return ScenarioSet(keep, self.seed, False)


def generate_scenarios(intervals: int, count: int, seed: Optional[int] = None,
                       outlier: bool = False) -> ScenarioSet:
    """``count`` scenarios of per-interval load multipliers.

    Draws are uniform on [0.99, 1.01]; with ``outlier`` the last of the
    ``count`` scenarios is replaced by a flat 1.09.
    """
    if count < 1:
        raise ValueError("scenario count must be >= 1")
    if intervals < 1:
        raise ValueError("intervals must be >= 1")
    if outlier and count < 2:
        raise ValueError("an outlier needs room beside at least one regular scenario")
    rng = np.random.default_rng(seed)
    n_regular = count - 1 if outlier else count
    mult = rng.uniform(*SCENARIO_RANGE, size=(n_regular, intervals))
    if outlier:
        mult = np.vstack([mult, np.full((1, intervals), OUTLIER_MULTIPLIER)])
    return ScenarioSet(mult, seed, outlier)


@dataclass(frozen=True)
class RunConfig:
    intervals: int = 24
    interval_minutes: float = 5.0
    delta_d_fraction: Optional[float] = None    # None: case delta_d, else 0.5 of load
    beta: float = 0.05
    mode: str = "both"
    include_storage: bool = True
    dispatch: DispatchConfig = field(default_factory=DispatchConfig)
    dro: DroOptions = field(default_factory=DroOptions)
    det: DetOptions = field(default_factory=DetOptions)
    load_profile: Optional[tuple] = None        # per-interval multiplier on the case loads
    scenario_count: int = 0                     # 0: assess around the forecast only
    scenario_outlier: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if self.intervals < 1:
            raise ValueError("intervals must be >= 1")
        if self.interval_minutes <= 0:
            raise ValueError("interval_minutes must be > 0")
        if self.delta_d_fraction is not None and self.delta_d_fraction < 0:
            raise ValueError("delta_d_fraction must be >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        if self.scenario_count < 0:
            raise ValueError("scenario_count must be >= 0")
        if self.load_profile is not None:
            prof = tuple(float(v) for v in self.load_profile)
            if len(prof) != self.intervals:
                raise ValueError(f"load_profile has {len(prof)} entries for {self.intervals} intervals")
            object.__setattr__(self, "load_profile", prof)

    @property
    def window_minutes(self) -> float:
        return self.intervals * self.interval_minutes

    @property
    def wants_det(self) -> bool:
        return self.mode in ("det", "both")

    @property
    def wants_sto(self) -> bool:
        return self.mode in ("sto", "both")

    def dro_options(self) -> DroOptions:
        return replace(self.dro, beta=self.beta)

    def scenarios(self) -> Optional[ScenarioSet]:
        if self.scenario_count == 0:
            return None
        return generate_scenarios(self.intervals, self.scenario_count, self.seed, self.scenario_outlier)


@dataclass
class ScenarioOutcome:
    scenario: int
    lambda_det: Optional[float] = None
    lambda_sto: Optional[float] = None
    iterations_det: Optional[int] = None
    iterations_sto: Optional[int] = None
    converged_det: Optional[bool] = None
    converged_sto: Optional[bool] = None
    time_ms_det: Optional[float] = None
    time_ms_sto: Optional[float] = None
    diagnostics: list = field(default_factory=list)


@dataclass
class IntervalResult:
    """Reported values for one interval.

    With several scenarios each reported lambda is the smallest over them,
    iterations the largest, convergence holds only if every scenario converged
    and times are summed. ``scenarios`` keeps the per-scenario outcomes.
    """

    interval: int
    lambda_det: Optional[float] = None
    lambda_sto: Optional[float] = None
    iterations_det: Optional[int] = None
    iterations_sto: Optional[int] = None
    converged_det: Optional[bool] = None
    converged_sto: Optional[bool] = None
    time_ms_det: Optional[float] = None
    time_ms_sto: Optional[float] = None
    dispatch_cost: float = 0.0
    scenarios: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(c is not False for c in (self.converged_det, self.converged_sto))


class RunHalted(RuntimeError):
    """Nominal dispatch failed partway; ``results`` holds the finished intervals."""

    def __init__(self, interval: int, results: list, cause: DispatchInfeasible):
        super().__init__(f"interval {interval}: {cause}")
        self.interval = interval
        self.results = results
        self.cause = cause


def record_assessment(out, prefix: str, res: AssessmentResult) -> None:
    """Copy an assessment onto the ``*_det`` or ``*_sto`` fields of ``out``."""
    setattr(out, f"lambda_{prefix}", float(res.lambda_star))
    setattr(out, f"iterations_{prefix}", res.iterations)
    setattr(out, f"converged_{prefix}", res.converged)
    setattr(out, f"time_ms_{prefix}", res.wall_time_ms)
    if res.diagnostic:
        out.diagnostics.append(f"{prefix}: {res.diagnostic}")
    out.diagnostics.extend(f"{prefix}: {w}" for w in res.warnings)


def _aggregate(res: IntervalResult, outcomes: Sequence[ScenarioOutcome]) -> None:
    for prefix in ("det", "sto"):
        lams = [getattr(o, f"lambda_{prefix}") for o in outcomes]
        if lams[0] is None:
            continue
        setattr(res, f"lambda_{prefix}", min(lams))
        setattr(res, f"iterations_{prefix}", max(getattr(o, f"iterations_{prefix}") for o in outcomes))
        setattr(res, f"converged_{prefix}", all(getattr(o, f"converged_{prefix}") for o in outcomes))
        setattr(res, f"time_ms_{prefix}", sum(getattr(o, f"time_ms_{prefix}") for o in outcomes))
    for o in outcomes:
        tag = "" if len(outcomes) == 1 else f"scenario {o.scenario} "
        res.diagnostics.extend(tag + d for d in o.diagnostics)


def run_sequence(net: Network, cfg: RunConfig = RunConfig(), scenarios: Optional[ScenarioSet] = None,
                 backend=None, state: Optional[IntervalState] = None,
                 progress: Optional[Callable[[IntervalResult], None]] = None) -> list[IntervalResult]:
    """Roll ``cfg.intervals`` intervals and assess each one.

    The dispatch trajectory always follows the forecast; scenarios only move
    the centre of the assessed box. Raises ``RunHalted`` carrying the finished
    intervals when a forecast dispatch is infeasible.
    """
    T = cfg.intervals
    if scenarios is not None and scenarios.intervals < T:
        raise ValueError(f"scenario set covers {scenarios.intervals} intervals, run needs {T}")
    profile = cfg.load_profile or (1.0,) * T
    dcfg = replace(cfg.dispatch, include_storage=cfg.include_storage)
    dro = cfg.dro_options()
    results: list[IntervalResult] = []

    if state is None:
        try:
            state = startup_state(net, profile[0] * net.load, dcfg)
        except DispatchInfeasible as exc:
            raise RunHalted(1, results, exc) from None
    state.check(net)

    for t in range(T):
        d_nom = profile[t] * net.load
        try:
            nominal = solve_nominal_dispatch(net, state, d_nom, dcfg)
        except DispatchInfeasible as exc:
            raise RunHalted(t + 1, results, exc) from None
        tau = budget_from_cost(nominal.cost, dcfg.tau_margin)
        m = build_matrices(net, state, dcfg, d_bar=d_nom, tau=tau)
        delta = deviation_for(net, d_nom, cfg.delta_d_fraction)
        centres = [d_nom] if scenarios is None else [scenarios.multipliers[s, t] * d_nom
                                                     for s in range(scenarios.count)]
        outcomes = []
        for s, centre in enumerate(centres):
            box = Hyperbox(centre, delta)
            o = ScenarioOutcome(s + 1)
            if cfg.wants_det:
                record_assessment(o, "det", assess_deterministic(m, box, cfg.det, backend))
            if cfg.wants_sto:
                record_assessment(o, "sto", assess_stochastic(m, box, dro, backend))
            outcomes.append(o)
        res = IntervalResult(t + 1, dispatch_cost=nominal.cost, scenarios=outcomes)
        _aggregate(res, outcomes)
        log.info("interval %d lambda_det=%s lambda_sto=%s", t + 1, res.lambda_det, res.lambda_sto)
        results.append(res)
        if progress is not None:
            progress(res)
        state = nominal.next_state
    return results


def run_ess_sensitivity(net: Network, cfg: RunConfig = RunConfig(),
                        scenarios: Optional[ScenarioSet] = None,
                        backend=None) -> tuple[list[IntervalResult], list[IntervalResult]]:
    """The same run with and without storage: ``(with_storage, without_storage)``."""
    if net.n_storage == 0:
        raise ValueError("case has no storage units")
    with_ess = run_sequence(net, replace(cfg, include_storage=True), scenarios, backend)
    without = run_sequence(net, replace(cfg, include_storage=False), scenarios, backend)
    return with_ess, without


# ----------------------------------------------------------------------------
# CSV

def _fmt_lam(v):
    return "" if v is None else f"{v:.6f}"


def _fmt_int(v):
    return "" if v is None else str(int(v))


def _fmt_flag(v):
    return "" if v is None else ("true" if v else "false")


def write_scenario_csv(results: Sequence[IntervalResult]) -> str:
    """One row per (interval, scenario)."""
    lines = ["interval,scenario,lambda_det,lambda_sto,iterations_det,iterations_sto,"
             "converged_det,converged_sto"]
    for r in results:
        for o in r.scenarios:
            lines.append(",".join([
                str(r.interval), str(o.scenario), _fmt_lam(o.lambda_det), _fmt_lam(o.lambda_sto),
                _fmt_int(o.iterations_det), _fmt_int(o.iterations_sto),
                _fmt_flag(o.converged_det), _fmt_flag(o.converged_sto),
            ]))
    return "\n".join(lines) + "\n"


def write_paired_csv(with_ess: Sequence[IntervalResult], without: Sequence[IntervalResult]) -> str:
    """Side-by-side lambdas of a storage sensitivity run."""
    lines = ["interval,lambda_det_ess,lambda_sto_ess,lambda_det_no_ess,lambda_sto_no_ess"]
    for a, b in zip(with_ess, without):
        lines.append(",".join([str(a.interval), _fmt_lam(a.lambda_det), _fmt_lam(a.lambda_sto),
                               _fmt_lam(b.lambda_det), _fmt_lam(b.lambda_sto)]))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# JSON run configuration

_RUN_KEYS = ("intervals", "interval_minutes", "delta_d_fraction", "beta", "mode", "include_storage",
             "load_profile", "scenario_count", "scenario_outlier", "seed")
_SECTIONS = {"dispatch": DispatchConfig, "dro": DroOptions, "det": DetOptions}
EXTRA_KEYS = ("ess_sensitivity", "backend", "matpower")


def run_config_from_dict(obj: dict) -> tuple[RunConfig, dict]:
    """``RunConfig`` from a JSON object using the dataclass field names.

    ``dispatch``, ``dro`` and ``det`` are nested objects with the fields of
    their option classes. Keys in ``EXTRA_KEYS`` are not run parameters and
    come back in the second element. Unknown keys raise ``ValueError``.
    """
    if not isinstance(obj, dict):
        raise ValueError("run configuration must be a JSON object")
    unknown = sorted(set(obj) - set(_RUN_KEYS) - set(_SECTIONS) - set(EXTRA_KEYS))
    if unknown:
        raise ValueError(f"unknown configuration key {unknown[0]!r}")
    kwargs = {k: obj[k] for k in _RUN_KEYS if k in obj}
    if "dro" in obj and isinstance(obj["dro"], dict) and "beta" in obj["dro"]:
        raise ValueError("set beta at the top level, not inside 'dro'")
    for key, cls in _SECTIONS.items():
        if key not in obj:
            continue
        sub = obj[key]
        if not isinstance(sub, dict):
            raise ValueError(f"'{key}' must be an object")
        fields = set(cls.__dataclass_fields__)
        bad = sorted(set(sub) - fields)
        if bad:
            raise ValueError(f"unknown key {bad[0]!r} in '{key}'")
        if key == "dispatch" and "include_storage" in sub:
            raise ValueError("set include_storage at the top level, not inside 'dispatch'")
        kwargs[key] = cls(**sub)
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ValueError(str(exc)) from None
    return cfg, {k: obj[k] for k in EXTRA_KEYS if k in obj}
