"""Indexed network arrays and DC shift factors."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .case_io import CaseDocument, validate_case


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    """Dense-indexed view of a case. Arrays are ordered as in the case file."""

    case: CaseDocument
    bus_ids: tuple
    bus_index: dict
    slack_index: int
    load: np.ndarray          # nominal net load per bus (MW)
    gen_bus: np.ndarray
    gen_min: np.ndarray
    gen_max: np.ndarray
    ramp_up: np.ndarray
    ramp_down: np.ndarray
    gen_cost: np.ndarray
    ess_bus: np.ndarray
    e_min: np.ndarray
    e_max: np.ndarray
    e_initial: np.ndarray
    p_charge_max: np.ndarray
    p_discharge_max: np.ndarray
    ess_cost: np.ndarray
    line_from: np.ndarray
    line_to: np.ndarray
    reactance: np.ndarray
    flow_limit: np.ndarray
    sf: np.ndarray            # |B| x |L|

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    @property
    def n_gen(self) -> int:
        return self.gen_bus.shape[0]

    @property
    def n_storage(self) -> int:
        return self.ess_bus.shape[0]

    @property
    def n_line(self) -> int:
        return self.line_from.shape[0]


def _unreachable(n_bus: int, frm: np.ndarray, to: np.ndarray, start: int) -> list[int]:
    adj = [[] for _ in range(n_bus)]
    for a, b in zip(frm.tolist(), to.tolist()):
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n_bus
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return [i for i in range(n_bus) if not seen[i]]


def compute_ptdf(n_bus: int, line_from, line_to, reactance, slack_index: int) -> np.ndarray:
    """Shift factors ``sf[b, l]``: MW on line ``l`` (from -> to) per MW injected
    at bus ``b`` and withdrawn at the slack."""
    frm = np.asarray(line_from, dtype=np.int64)
    to = np.asarray(line_to, dtype=np.int64)
    x = np.asarray(reactance, dtype=float)
    n_line = frm.shape[0]
    sf = np.zeros((n_bus, n_line))
    if n_bus <= 1 or n_line == 0:
        if n_bus > 1:
            raise NetworkError("network not connected or degenerate reactances")
        return sf
    B = np.zeros((n_bus, n_bus))
    y = 1.0 / x
    np.add.at(B, (frm, frm), y)
    np.add.at(B, (to, to), y)
    np.add.at(B, (frm, to), -y)
    np.add.at(B, (to, frm), -y)
    keep = np.array([i for i in range(n_bus) if i != slack_index])
    Br = B[np.ix_(keep, keep)]
    try:
        X = np.linalg.solve(Br, np.eye(n_bus - 1))  # LAPACK LU with partial pivoting
    except np.linalg.LinAlgError:
        raise NetworkError("network not connected or degenerate reactances") from None
    if not np.all(np.isfinite(X)):
        raise NetworkError("network not connected or degenerate reactances")
    Xf = np.zeros((n_bus, n_bus))
    Xf[np.ix_(keep, keep)] = X
    # angle at bus k per unit injection at b is Xf[k, b]
    sf = ((Xf[frm, :] - Xf[to, :]) * y[:, None]).T
    sf[slack_index, :] = 0.0
    return sf


def build_network(case: CaseDocument) -> Network:
    validate_case(case)
    ids = tuple(b.id for b in case.buses)
    index = {bid: i for i, bid in enumerate(ids)}
    slack = index[case.slack_bus] if case.slack_bus is not None else 0

    frm = np.array([index[ln.from_bus] for ln in case.lines], dtype=np.int64)
    to = np.array([index[ln.to_bus] for ln in case.lines], dtype=np.int64)
    lost = _unreachable(len(ids), frm, to, slack)
    if lost:
        raise NetworkError("disconnected network; unreachable buses: "
                           + ", ".join(str(ids[i]) for i in lost))
    x = np.array([ln.reactance for ln in case.lines], dtype=float)
    sf = compute_ptdf(len(ids), frm, to, x, slack)

    def arr(items, attr):
        return np.array([getattr(it, attr) for it in items], dtype=float)

    return Network(
        case=case,
        bus_ids=ids,
        bus_index=index,
        slack_index=slack,
        load=arr(case.buses, "load_mw"),
        gen_bus=np.array([index[g.bus] for g in case.generators], dtype=np.int64),
        gen_min=arr(case.generators, "p_min"),
        gen_max=arr(case.generators, "p_max"),
        ramp_up=arr(case.generators, "ramp_up"),
        ramp_down=arr(case.generators, "ramp_down"),
        gen_cost=arr(case.generators, "cost"),
        ess_bus=np.array([index[s.bus] for s in case.storage], dtype=np.int64),
        e_min=arr(case.storage, "e_min"),
        e_max=arr(case.storage, "e_max"),
        e_initial=arr(case.storage, "e_initial"),
        p_charge_max=arr(case.storage, "p_charge_max"),
        p_discharge_max=arr(case.storage, "p_discharge_max"),
        ess_cost=arr(case.storage, "cost"),
        line_from=frm,
        line_to=to,
        reactance=x,
        flow_limit=arr(case.lines, "flow_limit"),
        sf=sf,
    )


@dataclass(frozen=True)
class Hyperbox:
    """Net-load box ``d_bar +/- lambda * delta_d``."""

    d_bar: np.ndarray
    delta_d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d_bar, dtype=float)
        dd = np.asarray(self.delta_d, dtype=float)
        if d.shape != dd.shape or d.ndim != 1:
            raise ValueError("d_bar and delta_d must be vectors of equal length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(dd))):
            raise ValueError("hyperbox entries must be finite")
        if np.any(dd < 0):
            raise ValueError("delta_d must be nonnegative")
        object.__setattr__(self, "d_bar", d)
        object.__setattr__(self, "delta_d", dd)

    @property
    def size(self) -> int:
        return self.d_bar.shape[0]

    def vertex(self, lam: float, signs) -> np.ndarray:
        return self.d_bar + lam * self.delta_d * np.asarray(signs, dtype=float)

    def recentered(self, d_bar) -> "Hyperbox":
        return Hyperbox(np.asarray(d_bar, dtype=float), self.delta_d)


DEFAULT_DELTA_FRACTION = 0.5


def deviation_for(net: Network, d_bar, fraction: Optional[float] = None) -> np.ndarray:
    """Peak deviation per bus for a box centred at ``d_bar``.

    An explicit ``fraction`` gives ``fraction * |d_bar|`` everywhere. Otherwise
    buses carrying a ``delta_d`` in the case use it and the rest fall back to
    ``0.5 * |d_bar|``.
    """
    d = np.abs(np.asarray(d_bar, dtype=float))
    if fraction is not None:
        if fraction < 0:
            raise ValueError("delta_d_fraction must be >= 0")
        return fraction * d
    out = DEFAULT_DELTA_FRACTION * d
    for i, b in enumerate(net.case.buses):
        if b.delta_d is not None:
            out[i] = b.delta_d
    return out
