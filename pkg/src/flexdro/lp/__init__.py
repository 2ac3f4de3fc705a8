"""Dense LP kernel with dual values and 0/1 branch-and-bound."""
from .backends import Backend, BundledBackend, HighsBackend, get_backend
from .bnb import solve_milp
from .lpformat import dump_lp, read_lp
from .model import (
    DEFAULT_TOLERANCES,
    LinearProgram,
    MixedBinaryProgram,
    SolverSolution,
    Status,
    Tolerances,
)
from .simplex import CORE_NAME, Basis, PreparedLP, solve_lp

__all__ = [
    "Backend", "Basis", "BundledBackend", "CORE_NAME", "DEFAULT_TOLERANCES", "HighsBackend",
    "LinearProgram", "MixedBinaryProgram", "PreparedLP", "SolverSolution", "Status", "Tolerances",
    "dump_lp", "get_backend", "read_lp", "solve_lp", "solve_milp",
]
