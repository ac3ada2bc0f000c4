"""Rotation-averaging relaxations as standard-form cone programs.

Every program has the form::

    minimize    c^T x
    subject to  A x = b,   x in K_1 x K_2 x ... (PSD cones)

where each PSD block is stored through ``svec``. For a symmetric ``d x d``
matrix ``S``, ``svec(S)`` lists the lower triangle column by column,
i.e. ``S[0,0], S[1,0], ..., S[d-1,0], S[1,1], S[2,1], ..., S[d-1,d-1]``,
with every off-diagonal entry multiplied by ``sqrt(2)``. With this
convention ``svec(S) @ svec(T) == <S, T>_F``.

The first cone block is the 3n x 3n Gram matrix ``X``. Hull variants add a
4x4 slack ``S_ij = A(X_ij) + I`` per measured pair ``i < j``, with ``X_ij``
the (i, j) 3x3 block of ``X`` (rows of camera i, columns of camera j).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .cost import CostMatrix, is_connected
from .so3 import hull_operator

SQRT2 = np.sqrt(2.0)


class Formulation(enum.Enum):
    O3_ISO = "o3-iso"
    O3_ANISO = "o3-aniso"
    CSO3_ISO = "cso3-iso"
    CSO3_ANISO = "cso3-aniso"

    @property
    def hull(self) -> bool:
        return self in (Formulation.CSO3_ISO, Formulation.CSO3_ANISO)

    @property
    def mode(self) -> str:
        return "iso" if self in (Formulation.O3_ISO, Formulation.CSO3_ISO) else "aniso"


@lru_cache(maxsize=None)
def svec_indices(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row index, column index and scale of each ``svec`` coordinate."""
    # triu_indices walks (r, c), c >= r row by row; swapping gives the
    # lower triangle column by column.
    cols, rows = np.triu_indices(d)
    scale = np.where(rows == cols, 1.0, SQRT2)
    return rows, cols, scale


def svec_dim(d: int) -> int:
    return d * (d + 1) // 2


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled lower-triangle vectorisation; works on stacks ``(..., d, d)``."""
    d = S.shape[-1]
    rows, cols, scale = svec_indices(d)
    return S[..., rows, cols] * scale


def smat(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`svec`; works on stacks ``(..., svec_dim(d))``."""
    rows, cols, scale = svec_indices(d)
    S = np.zeros(v.shape[:-1] + (d, d))
    vals = v / scale
    S[..., rows, cols] = vals
    S[..., cols, rows] = vals
    return S


@lru_cache(maxsize=None)
def _svec_position(d: int) -> np.ndarray:
    """``pos[r, c]`` is the svec coordinate holding entry (r, c) (either triangle)."""
    rows, cols, _ = svec_indices(d)
    pos = np.empty((d, d), dtype=int)
    pos[rows, cols] = np.arange(len(rows))
    pos[cols, rows] = np.arange(len(rows))
    return pos


@lru_cache(maxsize=None)
def _hull_coefficients() -> np.ndarray:
    """``T[t, a, b]``: coefficient of ``Y[a, b]`` in ``svec(A(Y))[t]``."""
    T = np.zeros((10, 3, 3))
    for a in range(3):
        for b in range(3):
            E = np.zeros((3, 3))
            E[a, b] = 1.0
            T[:, a, b] = svec(hull_operator(E))
    return T


@dataclass(frozen=True)
class ConicProgram:
    """``min c^T x  s.t.  A x = b,  x in prod PSD(cone_sizes)``.

    ``offsets[k]`` is the first coordinate of cone block ``k``; block 0 is the
    Gram matrix and block ``k >= 1`` is the hull slack of ``pairs[k - 1]``
    (hull formulations only).
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cone_sizes: tuple[int, ...]
    offsets: tuple[int, ...]
    n_cams: int
    pairs: tuple[tuple[int, int], ...]
    formulation: Formulation

    @property
    def dim(self) -> int:
        return len(self.c)

    @property
    def n_eq(self) -> int:
        return len(self.b)

    def block(self, x: np.ndarray, k: int) -> np.ndarray:
        d = self.cone_sizes[k]
        o = self.offsets[k]
        return smat(x[o : o + svec_dim(d)], d)


def _dedupe_rows(A: sp.csr_matrix, b: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Drop exact duplicate equality rows."""
    seen = {}
    keep = []
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        key = (tuple(A.indices[lo:hi]), tuple(np.round(A.data[lo:hi], 14)), round(float(b[r]), 14))
        if key not in seen:
            seen[key] = r
            keep.append(r)
    if len(keep) == A.shape[0]:
        return A, b
    return A[keep], b[keep]


def build_program(cost: CostMatrix, formulation: Formulation | str) -> ConicProgram:
    formulation = Formulation(formulation)
    n = cost.n_cams
    if n < 2:
        raise ValueError(f"need at least 2 cameras, got {n}")
    if cost.mode != formulation.mode:
        raise ValueError(f"{formulation.value} needs a {formulation.mode} cost, got {cost.mode}")
    pairs = tuple(cost.pairs)
    if not is_connected(n, pairs):
        raise ValueError("measurement graph is disconnected; the gauge cannot be fixed per component")

    d = 3 * n
    gram_dim = svec_dim(d)
    pos = _svec_position(d)
    _, _, scale = svec_indices(d)

    c = -svec(cost.dense())
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    # X_ii = I: 6 entries of each diagonal block (lower triangle).
    for i in range(n):
        for a in range(3):
            for bb in range(a + 1):
                rows.append(r)
                cols.append(pos[3 * i + a, 3 * i + bb])
                vals.append(1.0)
                rhs.append(1.0 if a == bb else 0.0)
                r += 1

    cone_sizes = [d]
    offsets = [0]
    if formulation.hull:
        T = _hull_coefficients()
        eye4 = svec(np.eye(4))
        off = gram_dim
        for i, j in pairs:
            # svec(S)_t - svec(A(X_ij))_t = svec(I)_t; X_ij entries are off-diagonal
            # in X, so X[3i+a, 3j+b] = x[pos] / sqrt(2).
            for t in range(10):
                rows.append(r)
                cols.append(off + t)
                vals.append(1.0)
                for a in range(3):
                    for bb in range(3):
                        if T[t, a, bb] != 0.0:
                            p = pos[3 * i + a, 3 * j + bb]
                            rows.append(r)
                            cols.append(p)
                            vals.append(-T[t, a, bb] / scale[p])
                rhs.append(eye4[t])
                r += 1
            cone_sizes.append(4)
            offsets.append(off)
            off += 10
        c = np.concatenate([c, np.zeros(10 * len(pairs))])

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, len(c)))
    A.sum_duplicates()
    A, b = _dedupe_rows(A, np.asarray(rhs))
    return ConicProgram(c, A, b, tuple(cone_sizes), tuple(offsets), n, pairs if formulation.hull else (), formulation)


def extract_gram(program: ConicProgram, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (program.dim,):
        raise ValueError(f"solution has shape {x.shape}, program expects ({program.dim},)")
    X = program.block(x, 0)
    return 0.5 * (X + X.T)


def planted_vector(program: ConicProgram, rotations: Sequence[np.ndarray]) -> np.ndarray:
    """Feasible point ``X = R R^T`` (with exact hull slacks) for the given rotations."""
    R = np.vstack(rotations)
    return gram_vector(program, R @ R.T)


def gram_vector(program: ConicProgram, X: np.ndarray) -> np.ndarray:
    """Program vector for Gram matrix ``X``, hull slacks set to ``A(X_ij) + I``."""
    x = np.zeros(program.dim)
    x[: svec_dim(3 * program.n_cams)] = svec(X)
    for k, (i, j) in enumerate(program.pairs, start=1):
        o = program.offsets[k]
        Y = X[3 * i : 3 * i + 3, 3 * j : 3 * j + 3]
        x[o : o + 10] = svec(hull_operator(Y) + np.eye(4))
    return x
