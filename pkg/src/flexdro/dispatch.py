"""One dispatch interval as a slacked LP in the ``(A1, h1, H1, A2, h2, H2)`` form.

Decision vector ``y`` = generator outputs followed by storage outputs. Storage
output ``p`` (positive = discharge) is shifted to ``y = p + p_charge_max`` so
that every variable lives in ``y >= 0``; ``var_shift`` records the offsets.
The violation function is

    phi(xi) = min  w1.u1 + w_plus.u_plus + w_minus.u_minus
              s.t. A1 y - u1 <= h1 + H1 xi
                   A2 y + u_plus - u_minus = h2 + H2 xi
                   y, u >= 0
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .lp import LinearProgram, PreparedLP, Status, get_backend
from .lp.backends import BundledBackend
from .network import Network


class DispatchInfeasible(ValueError):
    """Nominal dispatch has no feasible point; ``rows`` names the constraints
    carrying the infeasibility certificate."""

    def __init__(self, message: str, rows: list[str]):
        super().__init__(message + (": " + ", ".join(rows) if rows else ""))
        self.rows = rows


@dataclass(frozen=True)
class IntervalState:
    p_prev: np.ndarray
    e_prev: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_prev", np.asarray(self.p_prev, dtype=float))
        object.__setattr__(self, "e_prev", np.asarray(self.e_prev, dtype=float))

    def check(self, net: Network, tol: float = 1e-9) -> None:
        if self.p_prev.shape != (net.n_gen,) or self.e_prev.shape != (net.n_storage,):
            raise ValueError("interval state does not match the network dimensions")
        if np.any(self.p_prev < net.gen_min - tol) or np.any(self.p_prev > net.gen_max + tol):
            raise ValueError("p_prev outside generator limits")
        if np.any(self.e_prev < net.e_min - tol) or np.any(self.e_prev > net.e_max + tol):
            raise ValueError("e_prev outside storage energy limits")


def initial_state(net: Network, p_prev=None) -> IntervalState:
    p = net.gen_min.copy() if p_prev is None else np.asarray(p_prev, dtype=float)
    return IntervalState(p, net.e_initial.copy())


@dataclass(frozen=True)
class DispatchConfig:
    tau_margin: float = 0.2
    ess_energy_step_hours: float = 1.0
    slack_weights: Optional[tuple] = None
    include_storage: bool = True
    enforce_ramps: bool = True

    def __post_init__(self):
        if self.tau_margin < 0:
            raise ValueError("tau_margin must be >= 0")
        if self.ess_energy_step_hours <= 0:
            raise ValueError("ess_energy_step_hours must be > 0")
        if self.slack_weights is not None:
            w = tuple(float(v) for v in self.slack_weights)
            if any(v < 0 for v in w):
                raise ValueError("slack weights must be >= 0")
            object.__setattr__(self, "slack_weights", w)


@dataclass(frozen=True, eq=False)
class DispatchMatrices:
    A1: np.ndarray
    h1: np.ndarray
    H1: np.ndarray
    A2: np.ndarray
    h2: np.ndarray
    H2: np.ndarray
    var_shift: np.ndarray
    row_labels: tuple
    var_labels: tuple
    cost_row: np.ndarray
    cost_offset: float          # true cost = cost_row @ y + cost_offset
    tau: float
    weights: np.ndarray         # M1 rows, then M2 "+" slacks, then M2 "-" slacks
    y_nominal: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vars(self) -> int:
        return self.A1.shape[1]

    @property
    def n_ineq(self) -> int:
        return self.A1.shape[0]

    @property
    def n_eq(self) -> int:
        return self.A2.shape[0]

    @property
    def n_bus(self) -> int:
        return self.H1.shape[1]

    @property
    def w1(self) -> np.ndarray:
        return self.weights[: self.n_ineq]

    @property
    def w_plus(self) -> np.ndarray:
        return self.weights[self.n_ineq: self.n_ineq + self.n_eq]

    @property
    def w_minus(self) -> np.ndarray:
        return self.weights[self.n_ineq + self.n_eq:]

    def rhs(self, xi) -> tuple[np.ndarray, np.ndarray]:
        xi = np.asarray(xi, dtype=float)
        return self.h1 + self.H1 @ xi, self.h2 + self.H2 @ xi


class _Rows:
    def __init__(self, n_vars: int, n_bus: int):
        self.A, self.h, self.H, self.labels = [], [], [], []
        self.V, self.N = n_vars, n_bus

    def add(self, label, a, h, H=None):
        self.A.append(a)
        self.h.append(h)
        self.H.append(np.zeros(self.N) if H is None else H)
        self.labels.append(label)

    def arrays(self):
        if not self.A:
            return np.zeros((0, self.V)), np.zeros(0), np.zeros((0, self.N))
        return np.array(self.A, dtype=float), np.array(self.h, dtype=float), np.array(self.H, dtype=float)


def _assemble(net: Network, state: IntervalState, cfg: DispatchConfig):
    """Every row except the cost budget."""
    G = net.n_gen
    E = net.n_storage if cfg.include_storage else 0
    V, N = G + E, net.n_bus
    gid = [g.id for g in net.case.generators]
    sid = [s.id for s in net.case.storage][:E]
    pc = net.p_charge_max[:E]
    shift = np.concatenate([np.zeros(G), pc])
    dt = cfg.ess_energy_step_hours
    rows = _Rows(V, N)

    def unit(j, s=1.0):
        a = np.zeros(V)
        a[j] = s
        return a

    for g in range(G):
        rows.add(f"gen_max[{gid[g]}]", unit(g), net.gen_max[g])
    for g in range(G):
        rows.add(f"gen_min[{gid[g]}]", unit(g, -1.0), -net.gen_min[g])
    if cfg.enforce_ramps:
        for g in range(G):
            rows.add(f"ramp_up[{gid[g]}]", unit(g), state.p_prev[g] + net.ramp_up[g])
        for g in range(G):
            rows.add(f"ramp_down[{gid[g]}]", unit(g, -1.0), -(state.p_prev[g] - net.ramp_down[g]))
    for k in range(E):
        j = G + k
        rows.add(f"ess_energy_max[{sid[k]}]", unit(j, -dt), net.e_max[k] - state.e_prev[k] - dt * pc[k])
        rows.add(f"ess_energy_min[{sid[k]}]", unit(j, dt), state.e_prev[k] - net.e_min[k] + dt * pc[k])
    for k in range(E):
        j = G + k
        rows.add(f"ess_power_max[{sid[k]}]", unit(j), net.p_discharge_max[k] + pc[k])
        rows.add(f"ess_power_min[{sid[k]}]", unit(j, -1.0), 0.0)

    lid = [ln.id for ln in net.case.lines]
    var_bus = np.concatenate([net.gen_bus, net.ess_bus[:E]]).astype(np.int64)
    for l in range(net.n_line):
        col = net.sf[:, l]
        a = col[var_bus]
        offset = float(col[net.ess_bus[:E]] @ pc) if E else 0.0
        rows.add(f"line_pos[{lid[l]}]", a, net.flow_limit[l] + offset, col.copy())
        rows.add(f"line_neg[{lid[l]}]", -a, net.flow_limit[l] - offset, -col)

    A1, h1, H1 = rows.arrays()
    A2 = np.ones((1, V))
    h2 = np.array([float(pc.sum())])
    H2 = np.ones((1, N))
    cost_row = np.concatenate([net.gen_cost, net.ess_cost[:E]])
    cost_offset = -float(net.ess_cost[:E] @ pc) if E else 0.0
    var_labels = tuple([f"p[{g}]" for g in gid] + [f"p_ess[{s}]" for s in sid])
    return A1, h1, H1, A2, h2, H2, shift, rows.labels, var_labels, cost_row, cost_offset


class NominalDispatch(NamedTuple):
    dispatch: np.ndarray        # unshifted MW values, generators then storage
    cost: float
    next_state: IntervalState


def _nominal_solve(net, state, d_bar, cfg):
    A1, h1, H1, A2, h2, H2, shift, labels, _, cost_row, cost_offset = _assemble(net, state, cfg)
    d_bar = np.asarray(d_bar, dtype=float)
    lp = LinearProgram(cost_row, A1, h1 + H1 @ d_bar, A2, h2 + H2 @ d_bar)
    sol = BundledBackend().solve_lp(lp)
    if sol.status is Status.INFEASIBLE:
        cert = np.zeros(0) if sol.farkas is None else np.asarray(sol.farkas)
        all_labels = list(labels) + ["balance"]
        rows = [all_labels[i] for i in np.flatnonzero(np.abs(cert[: len(all_labels)]) > 1e-9)]
        raise DispatchInfeasible("nominal dispatch infeasible", rows)
    if not sol.optimal:
        raise DispatchInfeasible(f"nominal dispatch failed ({sol.status.value})", [])
    y = sol.x
    return y, shift, float(cost_row @ y + cost_offset)


def solve_nominal_dispatch(net: Network, state: IntervalState, d_bar,
                           cfg: DispatchConfig = DispatchConfig()) -> NominalDispatch:
    """Least-cost dispatch at the forecast ``d_bar`` (no budget row)."""
    y, shift, cost = _nominal_solve(net, state, d_bar, cfg)
    p = y - shift
    G = net.n_gen
    E = shift.shape[0] - G
    e_next = state.e_prev.copy()
    if E:
        e_next[:E] = state.e_prev[:E] - p[G:] * cfg.ess_energy_step_hours
        e_next = np.clip(e_next, net.e_min, net.e_max)  # round-off only
    return NominalDispatch(p, cost, IntervalState(p[:G].copy(), e_next))


def budget_from_cost(cost: float, margin: float) -> float:
    """``(1 + margin) * cost``, widened by ``|cost|`` so it never undercuts a
    negative nominal cost."""
    return cost + margin * abs(cost)


def build_matrices(net: Network, state: IntervalState, cfg: DispatchConfig = DispatchConfig(),
                   d_bar=None, tau: float | None = None) -> DispatchMatrices:
    """Assemble the interval. The budget ``tau`` comes from the nominal
    dispatch at ``d_bar`` (default: the case loads) unless given."""
    d_bar = net.load if d_bar is None else np.asarray(d_bar, dtype=float)
    A1, h1, H1, A2, h2, H2, shift, labels, var_labels, cost_row, cost_offset = _assemble(net, state, cfg)
    y_nom = None
    if tau is None:
        y_nom, _, cost = _nominal_solve(net, state, d_bar, cfg)
        tau = budget_from_cost(cost, cfg.tau_margin)
    A1 = np.vstack([A1, cost_row[None, :]])
    h1 = np.append(h1, tau - cost_offset)
    H1 = np.vstack([H1, np.zeros((1, net.n_bus))])
    labels = tuple(labels) + ("cost_budget", "balance")
    M1, M2 = A1.shape[0], A2.shape[0]
    if cfg.slack_weights is None:
        weights = np.ones(M1 + 2 * M2)
    else:
        weights = np.array(cfg.slack_weights, dtype=float)
        if weights.shape != (M1 + 2 * M2,):
            raise ValueError(f"slack_weights needs {M1 + 2 * M2} entries, got {weights.shape[0]}")
    return DispatchMatrices(A1, h1, H1, A2, h2, H2, shift, labels, var_labels, cost_row,
                            cost_offset, float(tau), weights, y_nom)


# ----------------------------------------------------------------------------
# violation function

def phi_program(m: DispatchMatrices, xi, weights=None) -> LinearProgram:
    V, M1, M2 = m.n_vars, m.n_ineq, m.n_eq
    w = m.weights if weights is None else np.asarray(weights, dtype=float)
    b1, b2 = m.rhs(xi)
    c = np.concatenate([np.zeros(V), w])
    A_ub = np.hstack([m.A1, -np.eye(M1), np.zeros((M1, 2 * M2))])
    A_eq = np.hstack([m.A2, np.zeros((M2, M1)), np.eye(M2), -np.eye(M2)])
    return LinearProgram(c, A_ub, b1, A_eq, b2)


def phi_dual_program(m: DispatchMatrices, xi, weights=None) -> LinearProgram:
    M1, M2 = m.n_ineq, m.n_eq
    w = m.weights if weights is None else np.asarray(weights, dtype=float)
    b1, b2 = m.rhs(xi)
    lower = np.concatenate([-w[:M1], -w[M1 + M2:]])
    upper = np.concatenate([np.zeros(M1), w[M1:M1 + M2]])
    A = np.hstack([m.A1.T, m.A2.T])
    return LinearProgram(np.concatenate([b1, b2]), A, np.zeros(m.n_vars), lower=lower,
                         upper=upper, maximize=True)


class _Reusable:
    """Prepared primal/dual LPs of one matrix set, warm-started call to call."""

    def __init__(self, m: DispatchMatrices):
        zero = np.zeros(m.n_bus)
        self.primal = PreparedLP(phi_program(m, zero))
        self.dual = PreparedLP(phi_dual_program(m, zero))
        self.primal_basis = None
        self.dual_basis = None


def _reusable(m: DispatchMatrices) -> _Reusable:
    r = m._cache.get("phi")
    if r is None:
        r = m._cache["phi"] = _Reusable(m)
    return r


def evaluate_phi(m: DispatchMatrices, xi, weights=None, backend=None) -> float:
    """Minimal weighted slack needed to serve net load ``xi``."""
    if weights is not None or backend is not None:
        sol = get_backend(backend).solve_lp(phi_program(m, xi, weights))
    else:
        r = _reusable(m)
        b1, b2 = m.rhs(xi)
        sol = r.primal.solve(warm=r.primal_basis, b_ub=b1, b_eq=b2)
        if sol.optimal:
            r.primal_basis = sol.basis
    if not sol.optimal:
        raise RuntimeError(f"violation LP ended with status {sol.status.value}")
    return max(0.0, float(sol.objective))


def evaluate_phi_dual(m: DispatchMatrices, xi, weights=None, backend=None) -> float:
    """Same value from the dual side: max over mu in [-w, 0], nu in [-w-, w+]."""
    if weights is not None or backend is not None:
        sol = get_backend(backend).solve_lp(phi_dual_program(m, xi, weights))
    else:
        r = _reusable(m)
        b1, b2 = m.rhs(xi)
        sol = r.dual.solve(warm=r.dual_basis, c=np.concatenate([b1, b2]))
        if sol.optimal:
            r.dual_basis = sol.basis
    if not sol.optimal:
        raise RuntimeError(f"dual violation LP ended with status {sol.status.value}")
    return float(sol.objective)


def phi_duals(m: DispatchMatrices, xi) -> tuple[float, np.ndarray, np.ndarray]:
    """``(phi, mu, nu)``: the violation at ``xi`` with an optimal dual point."""
    r = _reusable(m)
    b1, b2 = m.rhs(xi)
    sol = r.dual.solve(warm=r.dual_basis, c=np.concatenate([b1, b2]))
    if not sol.optimal:
        raise RuntimeError(f"dual violation LP ended with status {sol.status.value}")
    r.dual_basis = sol.basis
    return float(sol.objective), sol.x[: m.n_ineq].copy(), sol.x[m.n_ineq:].copy()


def format_matrices(m: DispatchMatrices, precision: int = 6) -> str:
    """Plain-text table of every row: label, A row, rhs constant, H row."""
    def fmt(v):
        return f"{v:.{precision}g}"

    head = ["row"] + list(m.var_labels) + ["h"] + [f"H[{n}]" for n in range(m.n_bus)]
    out = ["\t".join(head)]
    for i in range(m.n_ineq):
        out.append("\t".join([m.row_labels[i] + " (<=)"] + [fmt(v) for v in m.A1[i]]
                             + [fmt(m.h1[i])] + [fmt(v) for v in m.H1[i]]))
    for i in range(m.n_eq):
        out.append("\t".join([m.row_labels[m.n_ineq + i] + " (=)"] + [fmt(v) for v in m.A2[i]]
                             + [fmt(m.h2[i])] + [fmt(v) for v in m.H2[i]]))
    out.append("\t".join(["var_shift"] + [fmt(v) for v in m.var_shift]))
    return "\n".join(out) + "\n"


def startup_state(net: Network, d_bar=None, cfg: DispatchConfig = DispatchConfig()) -> IntervalState:
    """State before the first interval: least-cost outputs at ``d_bar`` with
    ramp limits ignored, storage at its initial energy."""
    d_bar = net.load if d_bar is None else d_bar
    base = initial_state(net)
    loose = DispatchConfig(cfg.tau_margin, cfg.ess_energy_step_hours, None, False, False)
    y, shift, _ = _nominal_solve(net, base, d_bar, loose)
    return IntervalState(np.clip(y[: net.n_gen], net.gen_min, net.gen_max), net.e_initial.copy())
