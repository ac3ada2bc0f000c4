"""Error metrics against ground truth, all after removing the global gauge."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cost import EdgeMeasurement
from .so3 import align_gauge, log_map


@dataclass(frozen=True)
class MetricsReport:
    chordal_err: float
    mahalanobis_err: float
    rms_angular_deg: float
    runtime_s: float = 0.0
    method: str = ""
    metadata: dict = field(default_factory=dict)


def chordal_error(gt: Sequence[np.ndarray], est: Sequence[np.ndarray]) -> float:
    """``sqrt(sum_i ||R_i V - R_i*||_F^2)`` with the optimal common ``V``."""
    _, aligned = align_gauge(est, gt)
    return float(np.sqrt(sum(np.sum((a - g) ** 2) for a, g in zip(aligned, gt))))


def camera_hessians(edges: Sequence[EdgeMeasurement], n: int) -> np.ndarray:
    """Per-camera information ``H_i`` summed over incident edges (others held fixed).

    For the second camera of an edge the Hessian is carried over to its own
    perturbation frame, see :meth:`EdgeMeasurement.reversed`.
    """
    H = np.zeros((n, 3, 3))
    for e in edges:
        H[e.i] += e.h
        H[e.j] += e.reversed().h
    return H


def mahalanobis_error(
    gt: Sequence[np.ndarray],
    est: Sequence[np.ndarray],
    edges: Sequence[EdgeMeasurement],
    align: bool = True,
) -> float:
    """Axis-angle Mahalanobis error, taking the better of ``w - w*`` and ``w + w*`` per camera."""
    if len(gt) != len(est):
        raise ValueError("length mismatch")
    if align:
        _, est = align_gauge(est, gt)
    H = camera_hessians(edges, len(gt))
    total = 0.0
    for Hi, r, r_star in zip(H, est, gt):
        w, w_star = log_map(r), log_map(r_star)
        dm, dp = w - w_star, w + w_star
        total += min(dm @ Hi @ dm, dp @ Hi @ dp)
    return float(np.sqrt(max(total, 0.0)))


def angular_errors(gt: Sequence[np.ndarray], est: Sequence[np.ndarray]) -> np.ndarray:
    """Per-camera rotation angle (radians) of ``est_i gt_i^T`` after alignment."""
    _, aligned = align_gauge(est, gt)
    return np.array([np.linalg.norm(log_map(a @ g.T)) for a, g in zip(aligned, gt)])


def rms_angular_error(gt: Sequence[np.ndarray], est: Sequence[np.ndarray]) -> float:
    """RMS of per-camera angular errors, in degrees."""
    theta = angular_errors(gt, est)
    return float(np.degrees(np.sqrt(np.mean(theta**2))))


def evaluate(gt, est, edges, runtime_s: float = 0.0, method: str = "", metadata: dict | None = None) -> MetricsReport:
    return MetricsReport(
        chordal_error(gt, est),
        mahalanobis_error(gt, est, edges),
        rms_angular_error(gt, est),
        runtime_s,
        method,
        dict(metadata or {}),
    )
