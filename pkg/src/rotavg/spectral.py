"""Spectral baseline for anisotropic rotation averaging.

With every edge oriented so its weight multiplies from the left
(``N_ij = M_ij r_tilde_ij`` for both ``(i, j)`` and ``(j, i)``), noise-free
data satisfy ``N R = D R`` with ``D_i = sum_j M_ij``. The stacked rotations
therefore span the (approximate) null space of ``D^{-1} N - I``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .cost import EdgeMeasurement, Mode, edge_weight, is_connected, normalize_edges
from .rounding import _fix_coset
from .so3 import closest_rotation

DEGREE_COND_MAX = 1e12


def degree_and_cost(edges: Sequence[EdgeMeasurement], n: int, mode: Mode = "aniso"):
    """Unscaled ``N`` (3n x 3n) and the stack of degree blocks ``D_i`` (n x 3 x 3)."""
    edges = normalize_edges(edges, n)
    N = np.zeros((3 * n, 3 * n))
    D = np.zeros((n, 3, 3))
    for e in edges:
        for f in (e, e.reversed()):
            M = edge_weight(f, mode)
            N[3 * f.i : 3 * f.i + 3, 3 * f.j : 3 * f.j + 3] = M @ f.r_tilde
            D[f.i] += M
    return N, D


def spectral_solve(edges: Sequence[EdgeMeasurement], n: int, mode: Mode = "aniso") -> list[np.ndarray]:
    if n < 2:
        raise ValueError(f"need at least 2 cameras, got {n}")
    pairs = [(min(e.i, e.j), max(e.i, e.j)) for e in edges]
    if not is_connected(n, pairs):
        raise ValueError("measurement graph is disconnected")
    N, D = degree_and_cost(edges, n, mode)

    Dinv = np.empty_like(D)
    for i, Di in enumerate(D):
        Di = 0.5 * (Di + Di.T)
        if np.linalg.cond(Di) > DEGREE_COND_MAX:
            raise ValueError(f"degree block of camera {i} is singular")
        Dinv[i] = np.linalg.inv(Di)

    B = np.einsum("iab,ibc->iac", Dinv, N.reshape(n, 3, 3 * n)).reshape(3 * n, 3 * n) - np.eye(3 * n)
    # Right singular vectors of B for the three smallest singular values.
    _, U = np.linalg.eigh(B.T @ B)
    V = _fix_coset(U[:, :3])
    return [closest_rotation(V[3 * i : 3 * i + 3]) for i in range(n)]
