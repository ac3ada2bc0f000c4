"""Rank estimation, rounding of a Gram matrix to rotations, tightness certificates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostMatrix, objective_value
from .sdp import ConicProgram, extract_gram
from .so3 import closest_rotation
from .solver import SolverResult

RANK_ENERGY = 0.999
GAP_TOL = 1e-4


def estimate_rank(x: np.ndarray, energy: float = RANK_ENERGY) -> int:
    """Smallest k whose top-k singular values exceed ``energy`` of their total."""
    sv = np.abs(np.linalg.eigvalsh(0.5 * (x + x.T)))[::-1]
    total = sv.sum()
    if total <= 0:
        return 0
    return int(np.searchsorted(np.cumsum(sv), energy * total, side="right") + 1)


def _fix_coset(V: np.ndarray) -> np.ndarray:
    """Flip the third column if most 3x3 blocks have negative determinant."""
    dets = np.linalg.det(V.reshape(-1, 3, 3))
    pos, neg = np.sum(dets > 0), np.sum(dets < 0)
    if neg > pos or (neg == pos and dets[0] < 0):
        V = V.copy()
        V[:, 2] = -V[:, 2]
    return V


def rank3_factor(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """``V`` (3n x 3) with ``V V^T`` the best rank-3 approximation of ``x``.

    Returns ``(V, degenerate)``; degenerate when the third eigenvalue is
    negligible next to the first.
    """
    w, U = np.linalg.eigh(0.5 * (x + x.T))
    w3, U3 = w[::-1][:3], U[:, ::-1][:, :3]
    V = U3 * np.sqrt(np.maximum(w3, 0.0))
    degenerate = bool(w3[2] <= 1e-9 * max(w3[0], 1e-300))
    return _fix_coset(V), degenerate


def round_to_rotations(x: np.ndarray, *, full: bool = False):
    """Project each 3x3 block of the rank-3 factor onto SO(3).

    The result is defined up to a common gauge rotation. With ``full=True``
    returns ``(rotations, degenerate, block_dets)``.
    """
    V, degenerate = rank3_factor(x)
    blocks = V.reshape(-1, 3, 3)
    rots = [closest_rotation(B) for B in blocks]
    if full:
        return rots, degenerate, [float(d) for d in np.linalg.det(blocks)]
    return rots


@dataclass(frozen=True)
class Certificate:
    rank_estimate: int
    sdp_lower_bound: float
    rounded_cost: float
    relative_gap: float
    tight: bool
    per_block_det: tuple[float, ...]
    degenerate: bool = False


def certify(
    cost: CostMatrix,
    program: ConicProgram,
    result: SolverResult,
    gap_tol: float = GAP_TOL,
    energy: float = RANK_ENERGY,
) -> tuple[Certificate, list[np.ndarray]]:
    """Round the SDP solution and compare its cost against the SDP optimum.

    Returns ``(certificate, rotations)``.
    """
    if not result.optimal:
        raise ValueError(f"cannot certify a {result.status.value} solve")
    X = extract_gram(program, result.primal)
    rank = estimate_rank(X, energy)
    rots, degenerate, dets = round_to_rotations(X, full=True)
    bound = result.primal_objective
    rounded = objective_value(cost, rots)
    rel = (rounded - bound) / (1.0 + abs(bound))
    tight = rank == 3 and rel <= gap_tol
    return Certificate(rank, bound, rounded, rel, tight, tuple(dets), degenerate), rots
