"""Synthetic rotation-averaging instances.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64). Draw order
for :func:`generate`: ground-truth quaternions (4 normals per camera), one
uniform per unordered pair in lexicographic order per edge-set attempt,
then per selected edge: covariance frame quaternion (4 normals), 3
covariance eigenvalues, 3 standard normals for the perturbation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .cost import EdgeMeasurement, is_connected
from .so3 import exp_map, random_rotation

PRNG = "numpy.PCG64"
MAX_EDGE_RESAMPLES = 100


class Protocol(enum.Enum):
    UNIFORM = "uniform"
    TOY_THREE_CAM = "toy"


@dataclass(frozen=True)
class SynthConfig:
    n_cams: int
    p: float = 1.0
    cov_eig_range: tuple[float, float] = (0.01, 0.1)
    seed: int = 0
    noise: bool = True
    protocol: Protocol = Protocol.UNIFORM

    def __post_init__(self):
        lo, hi = self.cov_eig_range
        if not 0 < lo <= hi:
            raise ValueError(f"covariance eigenvalue range must satisfy 0 < lo <= hi, got {self.cov_eig_range}")
        if not 0 < self.p <= 1:
            raise ValueError(f"edge fraction p must lie in (0, 1], got {self.p}")
        if self.n_cams < 2:
            raise ValueError("need at least 2 cameras")


@dataclass
class Instance:
    n_cams: int
    edges: list[EdgeMeasurement]
    ground_truth: list[np.ndarray]
    metadata: dict = field(default_factory=dict)


def _edge_set(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen: list[tuple[int, int]] = []
    for _ in range(MAX_EDGE_RESAMPLES):
        keep = rng.random(len(all_pairs)) < p
        chosen = [pr for pr, k in zip(all_pairs, keep) if k]
        if is_connected(n, chosen):
            return chosen
    # Fall back: add the missing edges of a random spanning tree.
    order = rng.permutation(n)
    extra = set(chosen)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        extra.add((min(a, b), max(a, b)))
    return sorted(extra)


def _noisy_edge(i, j, R_i, R_j, Q, cov_eigs, xi, noise=True) -> EdgeMeasurement:
    cov_eigs = np.asarray(cov_eigs, dtype=float)
    h = Q @ np.diag(1.0 / cov_eigs) @ Q.T
    dw = Q @ (np.sqrt(cov_eigs) * xi) if noise else np.zeros(3)
    return EdgeMeasurement(i, j, exp_map(dw) @ R_i @ R_j.T, 0.5 * (h + h.T))


def generate(config: SynthConfig) -> Instance:
    """Random ground truth, random anisotropic covariances, noisy relative rotations."""
    rng = np.random.default_rng(config.seed)
    n = config.n_cams
    gt = [random_rotation(rng) for _ in range(n)]
    pairs = _edge_set(n, config.p, rng)
    lo, hi = config.cov_eig_range
    edges = []
    for i, j in pairs:
        Q = random_rotation(rng)
        eigs = rng.uniform(lo, hi, size=3)
        xi = rng.standard_normal(3)
        edges.append(_noisy_edge(i, j, gt[i], gt[j], Q, eigs, xi, config.noise))
    meta = {
        "generator": "rotavg.synth.generate",
        "prng": PRNG,
        "seed": config.seed,
        "protocol": config.protocol.value,
        "n_cams": n,
        "p": config.p,
        "cov_eig_range": list(config.cov_eig_range),
        "noise": config.noise,
    }
    return Instance(n, edges, gt, meta)


AXES = {"x": 0, "y": 1, "z": 2}


def toy_three_cam(sigma: float, axis: str = "x", eps: float = 1e-3, seed: int = 0) -> Instance:
    """Three cameras; edges (0,1), (1,2) have covariance ``eps I``, edge (0,2)
    has ``sigma`` on ``axis`` and ``eps`` on the other two axes.

    The perturbation draws depend on ``seed`` only, so a sweep over ``sigma``
    with a fixed seed reuses the same standard-normal noise.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    rng = np.random.default_rng(seed)
    gt = [random_rotation(rng) for _ in range(3)]
    xis = rng.standard_normal((3, 3))
    gray = np.full(3, eps)
    gray[AXES[axis]] = sigma
    eye = np.eye(3)
    edges = [
        _noisy_edge(0, 1, gt[0], gt[1], eye, np.full(3, eps), xis[0]),
        _noisy_edge(1, 2, gt[1], gt[2], eye, np.full(3, eps), xis[1]),
        _noisy_edge(0, 2, gt[0], gt[2], eye, gray, xis[2]),
    ]
    meta = {
        "generator": "rotavg.synth.toy_three_cam",
        "prng": PRNG,
        "seed": seed,
        "protocol": Protocol.TOY_THREE_CAM.value,
        "sigma": sigma,
        "axis": axis,
        "eps": eps,
    }
    return Instance(3, edges, gt, meta)
