"""Anisotropic rotation-averaging cost.

A relative measurement ``r_tilde ~ R_i R_j^T`` with Hessian ``h`` (for the
left perturbation ``R_ij = exp([dw]_x) r_tilde``) contributes the linear term
``-<M r_tilde, R_i R_j^T>`` with ``M = tr(h)/2 I - h``.

Block convention: the cost matrix ``N`` stores ``N_ij = W_ij`` for ``i < j``
(``W = M r_tilde`` when ``alpha == 0``) and ``N_ji = N_ij^T``. The objective
of a stacked rotation matrix ``R = [R_1; ...; R_n]`` is ``-<N, R R^T>``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .so3 import check_rotation, rotation_power

SYM_TOL = 1e-9
PSD_TOL = 1e-9
# EdgeMeasurement accepts rotations at the file-format tolerance.
EDGE_ROTATION_TOL = 1e-6
INDEFINITE_TOL = 1e-10
TIE_TOL = 1e-10

Mode = Literal["iso", "aniso"]


def _check_symmetric(h: np.ndarray, what: str) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (3, 3):
        raise ValueError(f"{what}: expected shape (3, 3), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError(f"{what}: non-finite entries")
    asym = float(np.max(np.abs(h - h.T)))
    if asym > SYM_TOL * max(1.0, float(np.max(np.abs(h)))):
        raise ValueError(f"{what}: not symmetric (max |H - H^T| = {asym:.3g})")
    return 0.5 * (h + h.T)


@dataclass(frozen=True)
class EdgeMeasurement:
    """Relative rotation ``r_tilde ~ R_i R_j^T`` with its 3x3 PSD Hessian."""

    i: int
    j: int
    r_tilde: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"edge ({self.i}, {self.j}): self-loop")
        if self.i < 0 or self.j < 0:
            raise ValueError(f"edge ({self.i}, {self.j}): negative camera index")
        what = f"edge ({self.i}, {self.j})"
        r = check_rotation(self.r_tilde, EDGE_ROTATION_TOL, f"{what} r_tilde")
        h = _check_symmetric(self.h, f"{what} hessian")
        lam_min = float(np.linalg.eigvalsh(h)[0])
        if lam_min < -PSD_TOL * max(1.0, float(np.max(np.abs(h)))):
            raise ValueError(f"{what} hessian: not PSD (min eigenvalue {lam_min:.3g})")
        object.__setattr__(self, "r_tilde", r)
        object.__setattr__(self, "h", h)

    def reversed(self) -> "EdgeMeasurement":
        """The same measurement expressed for the pair ``(j, i)``.

        ``R_ji = R_ij^T`` and the perturbation becomes ``-r_tilde^T dw``, so the
        Hessian transforms to ``r_tilde^T h r_tilde``.
        """
        r = self.r_tilde
        return EdgeMeasurement(self.j, self.i, r.T, r.T @ self.h @ r)


def weight_from_hessian(h: np.ndarray) -> np.ndarray:
    """``M = tr(H)/2 I - H``, the weight matching ``dw^T H dw`` as a trace form."""
    h = _check_symmetric(h, "hessian")
    return 0.5 * np.trace(h) * np.eye(3) - h


def hessian_from_weight(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`weight_from_hessian`: ``H = tr(M) I - M``."""
    m = np.asarray(m, dtype=float)
    return np.trace(m) * np.eye(3) - m


def weight_eigenvalues(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``M`` in decreasing order, from those of ``H``.

    With ``eta1 >= eta2 >= eta3`` the eigenvalues of ``H``, returns
    ``(eta1+eta2-eta3, eta1-eta2+eta3, -eta1+eta2+eta3) / 2``.
    """
    e1, e2, e3 = np.sort(np.linalg.eigvalsh(np.asarray(h, dtype=float)))[::-1]
    return 0.5 * np.array([e1 + e2 - e3, e1 - e2 + e3, -e1 + e2 + e3])


def is_indefinite(m: np.ndarray) -> bool:
    return bool(np.linalg.eigvalsh(np.asarray(m, dtype=float))[0] < -INDEFINITE_TOL)


def fraction_indefinite(edges: Iterable[EdgeMeasurement]) -> float:
    flags = [is_indefinite(weight_from_hessian(e.h)) for e in edges]
    return float(np.mean(flags)) if flags else 0.0


# Jacobian of dw -> vec(I + [dw]_x), column-major vec.
PROPAGATION_JACOBIAN = np.array(
    [
        [0, 0, 0],
        [0, 0, 1],
        [0, -1, 0],
        [0, 0, -1],
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [-1, 0, 0],
        [0, 0, 0],
    ],
    dtype=float,
)


def quadform_identity_check(h: np.ndarray, trials: int = 1000, rng: np.random.Generator | None = None) -> float:
    """Largest residual of the identities tying ``H`` to ``M``.

    Checks ``v^T H v == tr(hat(v)^T M hat(v))`` for random ``v`` and the
    first-order propagation identity ``J^T (I kron M) J == H``.
    """
    from .so3 import hat

    rng = np.random.default_rng(0) if rng is None else rng
    h = _check_symmetric(h, "hessian")
    m = weight_from_hessian(h)
    scale = max(1.0, float(np.max(np.abs(h))))
    worst = 0.0
    for v in rng.standard_normal((trials, 3)):
        K = hat(v)
        lhs = v @ h @ v
        rhs = np.trace(K.T @ m @ K)
        worst = max(worst, abs(lhs - rhs) / (scale * max(1.0, v @ v)))
    J = PROPAGATION_JACOBIAN
    prop = J.T @ np.kron(np.eye(3), m) @ J
    worst = max(worst, float(np.max(np.abs(prop - h))) / scale)
    return worst


@dataclass(frozen=True)
class SingleTermMinimizers:
    so3_rotation: np.ndarray
    so3_value: float
    o3_matrix: np.ndarray
    o3_value: float
    degenerate: bool


def single_term_value(m: np.ndarray, r_tilde: np.ndarray, r: np.ndarray) -> float:
    """``f(R) = -<M r_tilde, R> + <M r_tilde, r_tilde>``; zero at ``R = r_tilde``."""
    w = np.asarray(m) @ np.asarray(r_tilde)
    return float(-np.sum(w * r) + np.sum(w * r_tilde))


def single_term_minimizers(m: np.ndarray, r_tilde: np.ndarray) -> SingleTermMinimizers:
    """Minimise the single-term function over O(3) and SO(3) via its 8 KKT points.

    The KKT points are ``U S U^T r_tilde`` with ``M = U D U^T`` and
    ``S = diag(+-1, +-1, +-1)``.
    """
    m = _check_symmetric(m, "weight")
    r_tilde = np.asarray(r_tilde, dtype=float)
    lam, U = np.linalg.eigh(m)
    lam, U = lam[::-1], U[:, ::-1]
    # det(U S U^T r_tilde) = prod(S) * det(r_tilde) for any orthogonal U.
    det_r = np.linalg.det(r_tilde)

    cands = []
    for signs in itertools.product((1.0, -1.0), repeat=3):
        R = U @ np.diag(signs) @ U.T @ r_tilde
        cands.append((single_term_value(m, r_tilde, R), np.prod(signs) * det_r > 0, R))

    def best(pool):
        pool = sorted(pool, key=lambda c: c[0])
        tie = len(pool) > 1 and pool[1][0] - pool[0][0] < TIE_TOL
        return pool[0], tie

    (so3_v, _, so3_R), so3_tie = best([c for c in cands if c[1]])
    (o3_v, _, o3_R), o3_tie = best(cands)
    degenerate = so3_tie or o3_tie or abs(lam[1] - abs(lam[2])) < TIE_TOL
    return SingleTermMinimizers(so3_R, so3_v, o3_R, o3_v, bool(degenerate))


@dataclass
class CostMatrix:
    """Symmetric 3n x 3n block cost ``N`` (already divided by ``scale``).

    ``blocks`` holds ``N_ij`` for measured pairs with ``i < j``.
    """

    n_cams: int
    blocks: dict[tuple[int, int], np.ndarray]
    scale: float = 1.0
    mode: str = "aniso"
    alpha: float = 0.0
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def block(self, i: int, j: int) -> np.ndarray:
        if i == j:
            return np.zeros((3, 3))
        if i < j:
            return self.blocks.get((i, j), np.zeros((3, 3)))
        return self.blocks.get((j, i), np.zeros((3, 3))).T

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.blocks)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            N = np.zeros((3 * self.n_cams, 3 * self.n_cams))
            for (i, j), b in self.blocks.items():
                N[3 * i : 3 * i + 3, 3 * j : 3 * j + 3] = b
                N[3 * j : 3 * j + 3, 3 * i : 3 * i + 3] = b.T
            self._dense = N
        return self._dense


def normalize_edges(edges: Sequence[EdgeMeasurement], n: int) -> list[EdgeMeasurement]:
    """Orient every edge as ``i < j`` and reject duplicates / out-of-range indices."""
    seen: set[tuple[int, int]] = set()
    out = []
    for e in edges:
        if not (0 <= e.i < n and 0 <= e.j < n):
            raise ValueError(f"edge ({e.i}, {e.j}): camera index out of range for n={n}")
        e = e if e.i < e.j else e.reversed()
        if (e.i, e.j) in seen:
            raise ValueError(f"edge ({e.i}, {e.j}): duplicate measurement for this pair")
        seen.add((e.i, e.j))
        out.append(e)
    return out


def is_connected(n: int, pairs: Iterable[tuple[int, int]]) -> bool:
    pairs = list(pairs)
    if n <= 1:
        return n == 1
    if not pairs:
        return False
    rows, cols = zip(*pairs)
    g = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(g, directed=False)
    return n_comp == 1


def edge_weight(e: EdgeMeasurement, mode: Mode = "aniso") -> np.ndarray:
    return weight_from_hessian(e.h) if mode == "aniso" else np.eye(3)


def weighted_block(m: np.ndarray, r_tilde: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    """``r_tilde^alpha M r_tilde^(1-alpha)``; equals ``M r_tilde`` at ``alpha = 0``."""
    if alpha == 0.0:
        return m @ r_tilde
    return rotation_power(r_tilde, alpha) @ m @ rotation_power(r_tilde, 1.0 - alpha)


def cost_scale(edges: Sequence[EdgeMeasurement]) -> float:
    """Mean over edges of the largest Hessian eigenvalue."""
    if not edges:
        return 1.0
    s = float(np.mean([np.linalg.eigvalsh(e.h)[-1] for e in edges]))
    return s if s > 0 else 1.0


def assemble_cost(
    edges: Sequence[EdgeMeasurement],
    n: int,
    mode: Mode = "aniso",
    alpha: float = 0.0,
) -> CostMatrix:
    if mode not in ("iso", "aniso"):
        raise ValueError(f"unknown cost mode {mode!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    edges = normalize_edges(edges, n)
    scale = cost_scale(edges) if mode == "aniso" else 1.0
    blocks = {(e.i, e.j): weighted_block(edge_weight(e, mode), e.r_tilde, alpha) / scale for e in edges}
    return CostMatrix(n, blocks, scale, mode, alpha)


def objective_value(cost: CostMatrix, rotations: Sequence[np.ndarray]) -> float:
    """``-<N, R R^T>`` evaluated blockwise over measured pairs."""
    if len(rotations) != cost.n_cams:
        raise ValueError(f"expected {cost.n_cams} rotations, got {len(rotations)}")
    total = 0.0
    for (i, j), b in cost.blocks.items():
        total += float(np.sum(b * (rotations[i] @ rotations[j].T)))
    return -2.0 * total
