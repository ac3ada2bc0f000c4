"""Rotation-group primitives.

Rotations are plain ``(3, 3)`` float arrays and axis-angle vectors are
``(3,)`` arrays (angle times unit axis). Nothing here mutates its inputs.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

ROTATION_TOL = 1e-9
HULL_TOL = 1e-8

# Threshold (radians) below which exp/log fall back to series expansions.
_SMALL_ANGLE = 1e-4
# Above this angle log_map reads the axis from the symmetric part.
_LARGE_ANGLE = 0.75 * np.pi


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(v) @ w == np.cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` applied to the skew part of ``m``."""
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def exp_map(v: np.ndarray) -> np.ndarray:
    """Rodrigues formula: axis-angle vector to rotation matrix."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    K = hat(v)
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def log_map(r: np.ndarray) -> np.ndarray:
    """Principal logarithm of a rotation, returned as an axis-angle vector.

    The result has norm in ``[0, pi]``. At exactly ``pi`` the sign of the
    axis is arbitrary.
    """
    r = np.asarray(r, dtype=float)
    w = vee(r)
    s = float(np.linalg.norm(w))
    c = 0.5 * (np.trace(r) - 1.0)
    theta = float(np.arctan2(s, c))

    if theta < _SMALL_ANGLE:
        # theta / sin(theta) to second order
        return (1.0 + theta * theta / 6.0) * w
    if theta < _LARGE_ANGLE:
        return (theta / s) * w

    # Near pi, sin(theta) -> 0; recover the axis from (R + R^T)/2 = cI + (1-c) a a^T.
    sym = 0.5 * (r + r.T)
    aat = (sym - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(aat)))
    axis = aat[:, k] / np.sqrt(max(aat[k, k], 1e-300))
    axis /= np.linalg.norm(axis)
    if axis @ w < 0.0:
        axis = -axis
    return theta * axis


def closest_rotation(m: np.ndarray, *, full: bool = False):
    """Frobenius-nearest rotation to ``m``.

    With ``full=True`` returns ``(R, unique)`` where ``unique`` is False if
    the projection is not unique (rank deficient input, or a reflection
    whose two smallest singular values coincide). A valid rotation is
    returned either way.
    """
    m = np.asarray(m, dtype=float)
    U, sv, Vt = np.linalg.svd(m)
    d = 1.0 if np.linalg.det(U @ Vt) > 0 else -1.0
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    if not full:
        return R
    tol = 1e-12 * max(sv[0], 1e-300)
    unique = sv[1] > tol and not (d < 0 and sv[1] - sv[2] <= tol)
    if sv[0] == 0.0:
        unique = False
    return R, bool(unique)


def is_rotation(m: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    if np.max(np.abs(m @ m.T - np.eye(3))) > tol:
        return False
    return abs(np.linalg.det(m) - 1.0) <= tol


def check_rotation(m: np.ndarray, tol: float = ROTATION_TOL, what: str = "matrix") -> np.ndarray:
    """Return ``m`` as a float array or raise ``ValueError`` naming the broken invariant."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"{what}: expected shape (3, 3), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what}: non-finite entries")
    orth = float(np.max(np.abs(m @ m.T - np.eye(3))))
    if orth > tol:
        raise ValueError(f"{what}: not orthogonal (max |R R^T - I| = {orth:.3g})")
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > tol:
        raise ValueError(f"{what}: determinant {det:.6g} is not +1")
    return m


def align_gauge(est: Sequence[np.ndarray], gt: Sequence[np.ndarray]):
    """Find the global rotation ``V`` minimising ``sum ||est[i] V - gt[i]||_F^2``.

    Returns ``(V, aligned)`` with ``aligned[i] = est[i] @ V``.
    """
    if len(est) != len(gt):
        raise ValueError(f"length mismatch: {len(est)} estimates vs {len(gt)} references")
    if len(est) == 0:
        raise ValueError("cannot align empty rotation lists")
    acc = np.zeros((3, 3))
    for r, r_star in zip(est, gt):
        acc += np.asarray(r).T @ np.asarray(r_star)
    V = closest_rotation(acc)
    return V, [np.asarray(r) @ V for r in est]


def hull_operator(y: np.ndarray) -> np.ndarray:
    """The 4x4 symmetric linear map A(Y); ``Y`` lies in conv(SO(3)) iff A(Y) + I is PSD."""
    y = np.asarray(y, dtype=float)
    (y11, y12, y13), (y21, y22, y23), (y31, y32, y33) = y
    return np.array(
        [
            [-y11 - y22 + y33, y13 + y31, y12 - y21, y23 + y32],
            [y13 + y31, y11 - y22 - y33, y23 - y32, y12 + y21],
            [y12 - y21, y23 - y32, y11 + y22 + y33, y31 - y13],
            [y23 + y32, y12 + y21, y31 - y13, -y11 + y22 - y33],
        ]
    )


def hull_margin(y: np.ndarray) -> float:
    """Smallest eigenvalue of A(Y) + I (non-negative inside the hull)."""
    return float(np.linalg.eigvalsh(hull_operator(y) + np.eye(4))[0])


def in_hull(y: np.ndarray, tol: float = HULL_TOL) -> bool:
    return hull_margin(y) >= -tol


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation via a normalised Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_power(r: np.ndarray, alpha: float) -> np.ndarray:
    """``r ** alpha`` along the principal geodesic, i.e. ``exp(alpha * log(r))``."""
    return exp_map(alpha * log_map(r))
