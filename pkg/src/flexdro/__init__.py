"""Hyperbox flexibility assessment for sequential real-time economic dispatch."""
from .case_io import CaseDocument, CaseError, load_case, parse_case_json, parse_matpower_case
from .deterministic import AssessmentResult, DetOptions, assess_deterministic
from .dispatch import DispatchConfig, IntervalState, build_matrices, evaluate_phi, evaluate_phi_dual
from .network import Hyperbox, Network, build_network
from .rted import RunConfig, generate_scenarios, run_ess_sensitivity, run_sequence
from .stochastic import DroOptions, assess_stochastic

__version__ = "0.1.0"

__all__ = [
    "AssessmentResult", "CaseDocument", "CaseError", "DetOptions", "DispatchConfig", "DroOptions",
    "Hyperbox", "IntervalState", "Network", "RunConfig", "assess_deterministic", "assess_stochastic",
    "build_matrices", "build_network", "evaluate_phi", "evaluate_phi_dual", "generate_scenarios",
    "load_case", "parse_case_json", "parse_matpower_case", "run_ess_sensitivity", "run_sequence",
]
