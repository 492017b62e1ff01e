"""Global AC optimal power flow through the moment-SOS hierarchy."""
from .certify import Certificate, MomentSolution, OpfSolution, certify, extract_point, to_opf_solution
from .cli import SweepSpec, run_hierarchy, run_solve, run_sweep
from .formulation import PolyProblem, build_complex_opf, build_poly_opf, with_deviation_objective
from .moments import MomentSDP, build_rank_relaxation, build_relaxation, rank_relaxation_opf
from .netmodel import CaseError, NetworkCase, load_case
from .sdp import SDPInstance, SDPSolution, solve

__all__ = [
    "CaseError", "Certificate", "MomentSDP", "MomentSolution", "NetworkCase", "OpfSolution",
    "PolyProblem", "SDPInstance", "SDPSolution", "build_complex_opf", "build_poly_opf",
    "build_rank_relaxation", "build_relaxation", "certify", "extract_point", "load_case",
    "rank_relaxation_opf", "run_hierarchy", "run_solve", "run_sweep", "solve", "SweepSpec",
    "to_opf_solution", "with_deviation_objective",
]
__version__ = "0.1.0"
