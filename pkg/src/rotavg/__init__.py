"""Certifiably optimal anisotropic rotation averaging."""
from .cost import CostMatrix, EdgeMeasurement, assemble_cost, objective_value, weight_from_hessian
from .pipeline import METHODS, Outcome, run_method
from .rounding import Certificate, certify, estimate_rank, round_to_rotations
from .sdp import ConicProgram, Formulation, build_program, extract_gram
from .solver import SolverResult, SolverSettings, Status, solve
from .spectral import spectral_solve
from .synth import Instance, SynthConfig, generate, toy_three_cam

__all__ = [
    "CostMatrix", "EdgeMeasurement", "assemble_cost", "objective_value", "weight_from_hessian",
    "METHODS", "Outcome", "run_method",
    "Certificate", "certify", "estimate_rank", "round_to_rotations",
    "ConicProgram", "Formulation", "build_program", "extract_gram",
    "SolverResult", "SolverSettings", "Status", "solve",
    "spectral_solve",
    "Instance", "SynthConfig", "generate", "toy_three_cam",
]
__version__ = "0.1.0"
