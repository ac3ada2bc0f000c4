"""End-to-end estimation: cost -> program -> solve -> round -> certify -> metrics."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import EdgeMeasurement, assemble_cost, fraction_indefinite
from .metrics import MetricsReport, evaluate
from .rounding import GAP_TOL, Certificate, certify, round_to_rotations
from .sdp import Formulation, build_program, extract_gram
from .solver import SolverResult, SolverSettings, solve
from .spectral import spectral_solve

METHODS = tuple(f.value for f in Formulation) + ("spectral",)


@dataclass
class Outcome:
    method: str
    rotations: list[np.ndarray]
    runtime_s: float
    solver: SolverResult | None = None
    certificate: Certificate | None = None
    metrics: MetricsReport | None = None
    percent_indefinite: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.solver is None or self.solver.optimal


def run_method(
    n: int,
    edges: Sequence[EdgeMeasurement],
    method: str,
    settings: SolverSettings | None = None,
    alpha: float = 0.0,
    ground_truth: Sequence[np.ndarray] | None = None,
    gap_tol: float = GAP_TOL,
    backend: str = "admm",
) -> Outcome:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    if method == "spectral":
        rots = spectral_solve(edges, n)
        out = Outcome(method, rots, time.perf_counter() - t0)
    else:
        form = Formulation(method)
        cost = assemble_cost(edges, n, form.mode, alpha)
        program = build_program(cost, form)
        result = solve(program, settings, backend)
        if result.optimal:
            cert, rots = certify(cost, program, result, gap_tol)
        else:
            cert, rots = None, round_to_rotations(extract_gram(program, result.primal))
        out = Outcome(method, rots, time.perf_counter() - t0, result, cert)
    out.percent_indefinite = 100.0 * fraction_indefinite(edges)
    if ground_truth is not None:
        out.metrics = evaluate(ground_truth, out.rotations, edges, out.runtime_s, method)
    return out
