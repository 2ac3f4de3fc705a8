"""Problem and result records shared by every LP/MILP backend."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    max_pivots: int = 50_000
    bland_after: int = 1_000
    refactor_every: int = 64
    int_tol: float = 1e-6
    mip_gap: float = 1e-6
    max_nodes: int = 200_000
    max_binaries: int = 64


DEFAULT_TOLERANCES = Tolerances()


def _as_matrix(a, ncols: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    a = np.array(a, dtype=float, ndmin=2)
    if a.size == 0:
        return np.zeros((0, ncols))
    return a


def _as_vector(v, size: int, fill: float) -> np.ndarray:
    if v is None:
        return np.full(size, fill)
    v = np.array(v, dtype=float).reshape(-1)
    if v.size == 0 and size > 0:
        return np.full(size, fill)
    return v


@dataclass
class LinearProgram:
    """``min|max c·y`` s.t. ``A_ub y <= b_ub``, ``A_eq y = b_eq``, ``lower <= y <= upper``.

    Omitted bounds default to ``y >= 0``. Infinite bounds are allowed.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    maximize: bool = False
    row_names: Optional[list] = None
    col_names: Optional[list] = None

    def __post_init__(self):
        self.c = np.array(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub = _as_matrix(self.A_ub, n)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_ub = _as_vector(self.b_ub, self.A_ub.shape[0], 0.0)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0], 0.0)
        self.lower = _as_vector(self.lower, n, 0.0)
        self.upper = _as_vector(self.upper, n, np.inf)
        if self.A_ub.shape != (self.b_ub.size, n):
            raise ValueError(f"A_ub has shape {self.A_ub.shape}, expected ({self.b_ub.size}, {n})")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise ValueError(f"A_eq has shape {self.A_eq.shape}, expected ({self.b_eq.size}, {n})")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower > upper for variable {j}")
        if np.isnan(self.c).any() or np.isnan(self.A_ub).any() or np.isnan(self.A_eq).any():
            raise ValueError("NaN in problem data")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_ub(self) -> int:
        return self.A_ub.shape[0]

    @property
    def num_eq(self) -> int:
        return self.A_eq.shape[0]

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LinearProgram":
        return LinearProgram(
            self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, lower, upper,
            self.maximize, self.row_names, self.col_names,
        )


@dataclass
class MixedBinaryProgram:
    lp: LinearProgram
    binaries: np.ndarray

    def __post_init__(self):
        self.binaries = np.array(self.binaries, dtype=np.int64).reshape(-1)
        n = self.lp.num_vars
        if self.binaries.size and (self.binaries.min() < 0 or self.binaries.max() >= n):
            raise ValueError("binary index out of range")
        if len(set(self.binaries.tolist())) != self.binaries.size:
            raise ValueError("duplicate binary index")
        lo = self.lp.lower[self.binaries]
        hi = self.lp.upper[self.binaries]
        if np.any(lo < 0) or np.any(hi > 1):
            raise ValueError("binary variables must have bounds within [0, 1]")


@dataclass
class SolverSolution:
    """Result of an LP or MILP solve.

    ``duals`` holds one value per row (inequality rows first, then equality
    rows) and is the sensitivity of the optimal objective to that row's
    right-hand side. Under this convention a ``<=`` row has a nonpositive dual
    in a minimization and a nonnegative dual in a maximization.
    """

    status: Status
    x: Optional[np.ndarray] = None
    objective: float = float("nan")
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    nodes: int = 0
    gap: float = float("nan")
    bound: float = float("nan")
    basis: Any = None
    farkas: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
