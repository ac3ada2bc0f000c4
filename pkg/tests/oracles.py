"""Independent reference computations used only by the tests."""
from __future__ import annotations

import numpy as np


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix (no LAPACK)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(A**2) - np.sum(np.diag(A) ** 2)))
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300 + 1e-18 * (abs(A[p, p]) + abs(A[q, q])):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A).copy(), V


def jacobi_psd_project(S: np.ndarray) -> np.ndarray:
    w, V = jacobi_eigh(0.5 * (S + S.T))
    return (V * np.maximum(w, 0.0)) @ V.T


def random_rotations(rng: np.random.Generator, k: int) -> np.ndarray:
    """``k`` uniform rotations via QR of Gaussian matrices (independent of the package sampler)."""
    out = np.empty((k, 3, 3))
    for t in range(k):
        Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
        Q = Q @ np.diag(np.sign(np.diag(R)))
        if np.linalg.det(Q) < 0:
            Q[:, 0] = -Q[:, 0]
        out[t] = Q
    return out


def random_orthogonal(rng: np.random.Generator, k: int) -> np.ndarray:
    R = random_rotations(rng, k)
    flip = rng.random(k) < 0.5
    R[flip, :, 2] *= -1
    return R


def random_psd(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((3, 3)) * scale
    return G @ G.T
