import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from oracles import random_rotations
from rotavg.so3 import (
    align_gauge,
    closest_rotation,
    exp_map,
    hat,
    hull_margin,
    hull_operator,
    in_hull,
    is_rotation,
    log_map,
    random_rotation,
    rotation_power,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))


def test_hat_basis():
    np.testing.assert_array_equal(hat([0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(hat([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(vec3, vec3)
def test_hat_is_cross_product(v, w):
    K = hat(v)
    np.testing.assert_allclose(K, -K.T)
    assert np.trace(K) == 0
    np.testing.assert_allclose(K @ w, np.cross(v, w), atol=1e-9)


def test_hat_square_identity(rng):
    for v in rng.standard_normal((100, 3)):
        np.testing.assert_allclose(-hat(v) @ hat(v), (v @ v) * np.eye(3) - np.outer(v, v), atol=1e-12)


def test_exp_known_values():
    np.testing.assert_array_equal(exp_map(np.zeros(3)), np.eye(3))
    np.testing.assert_allclose(exp_map([np.pi / 2, 0, 0]), [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-15)


def test_exp_preserves_axis(rng):
    for v in rng.standard_normal((50, 3)):
        R = exp_map(v)
        assert is_rotation(R)
        np.testing.assert_allclose(R @ v, v, atol=1e-12)


def test_log_known_values():
    np.testing.assert_array_equal(log_map(np.eye(3)), np.zeros(3))
    v = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(log_map(exp_map(v)), v, atol=1e-10)
    w = log_map(np.diag([1.0, -1.0, -1.0]))
    np.testing.assert_allclose(np.abs(w), [np.pi, 0, 0], atol=1e-12)


def test_log_exp_roundtrip(rng):
    dirs = rng.standard_normal((100, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    angles = rng.uniform(0, np.pi, 100)
    angles[:5] = [1e-9, 1e-6, 1e-3, np.pi - 1e-6, np.pi - 1e-3]
    for a, d in zip(angles, dirs):
        v = a * d
        np.testing.assert_allclose(log_map(exp_map(v)), v, atol=1e-10)


def test_log_norm_at_most_pi(rng):
    for v in rng.standard_normal((200, 3)) * 5:
        assert np.linalg.norm(log_map(exp_map(v))) <= np.pi + 1e-9


def test_closest_rotation_fixed_point_and_scale(rng):
    for R in random_rotations(rng, 20):
        np.testing.assert_allclose(closest_rotation(R), R, atol=1e-12)
        np.testing.assert_allclose(closest_rotation(2.0 * R), R, atol=1e-12)
        R2 = closest_rotation(R + 0.1 * rng.standard_normal((3, 3)))
        np.testing.assert_allclose(closest_rotation(R2), R2, atol=1e-12)


def test_closest_rotation_of_reflection_beats_sampling(rng):
    m = np.diag([1.0, 1.0, -1.0]) * 1.01 + 1e-3 * rng.standard_normal((3, 3))
    R, unique = closest_rotation(m, full=True)
    assert is_rotation(R)
    assert unique
    samples = random_rotations(rng, 100_000)
    best = np.min(np.sum((samples - m) ** 2, axis=(1, 2)))
    assert np.sum((R - m) ** 2) <= best + 1e-12


def test_closest_rotation_degenerate_still_valid():
    R, unique = closest_rotation(np.outer([1.0, 0, 0], [0, 1.0, 0]), full=True)
    assert not unique
    assert is_rotation(R)
    R, unique = closest_rotation(np.zeros((3, 3)), full=True)
    assert not unique and is_rotation(R)


def test_align_gauge_exact(rng):
    gt = list(random_rotations(rng, 6))
    V, aligned = align_gauge(gt, gt)
    np.testing.assert_allclose(V, np.eye(3), atol=1e-12)
    W = random_rotation(rng)
    V, aligned = align_gauge([g @ W.T for g in gt], gt)
    np.testing.assert_allclose(V, W, atol=1e-12)
    for a, g in zip(aligned, gt):
        np.testing.assert_allclose(a, g, atol=1e-12)


def test_align_gauge_errors():
    with pytest.raises(ValueError):
        align_gauge([], [])
    with pytest.raises(ValueError):
        align_gauge([np.eye(3)], [np.eye(3), np.eye(3)])


def _gauge_objective(est, gt, V):
    return sum(np.sum((e @ V - g) ** 2) for e, g in zip(est, gt))


def test_align_gauge_matches_brute_force(rng):
    for _ in range(3):
        est = list(random_rotations(rng, 5))
        gt = list(random_rotations(rng, 5))
        V, _ = align_gauge(est, gt)
        grid = random_rotations(rng, 5000)
        start = grid[np.argmin([_gauge_objective(est, gt, G) for G in grid])]
        res = minimize(lambda w: _gauge_objective(est, gt, start @ exp_map(w)), np.zeros(3),
                       method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
        assert abs(_gauge_objective(est, gt, V) - res.fun) < 1e-6
        assert _gauge_objective(est, gt, V) <= _gauge_objective(est, gt, np.eye(3)) + 1e-12


def test_hull_operator_values():
    np.testing.assert_array_equal(hull_operator(np.eye(3)), np.diag([-1.0, -1, 3, -1]))
    np.testing.assert_array_equal(hull_operator(np.zeros((3, 3))), np.zeros((4, 4)))
    np.testing.assert_array_equal(hull_operator(np.diag([1.0, 1, -1])), np.diag([-3.0, 1, 1, 1]))


def test_hull_operator_linear_symmetric(rng):
    for _ in range(20):
        Y, Z = rng.standard_normal((2, 3, 3))
        a, b = rng.standard_normal(2)
        A = hull_operator(a * Y + b * Z)
        np.testing.assert_allclose(A, a * hull_operator(Y) + b * hull_operator(Z), atol=1e-12)
        np.testing.assert_array_equal(A, A.T)


def test_hull_membership_trichotomy(rng):
    for R in random_rotations(rng, 200):
        assert in_hull(R)
    assert not in_hull(np.diag([1.0, 1, -1]))
    assert hull_margin(np.diag([1.0, 1, -1])) == pytest.approx(-2.0)
    for _ in range(200):
        k = rng.integers(1, 11)
        w = rng.dirichlet(np.ones(k))
        Y = np.einsum("k,kab->ab", w, random_rotations(rng, k))
        assert in_hull(Y)
    for _ in range(200):
        U, V = random_rotations(rng, 2)
        assert not in_hull(U @ np.diag([1.0, 1, -1]) @ V.T)
    R1, R2 = random_rotations(rng, 2)
    assert in_hull(0.5 * R1 + 0.5 * R2)


@settings(max_examples=50)
@given(vec3, st.floats(0, 1))
def test_rotation_power_endpoints(v, a):
    v = v / max(1.0, np.linalg.norm(v) / 3.0)
    R = exp_map(v)
    np.testing.assert_allclose(rotation_power(R, 0.0), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(rotation_power(R, 1.0), R, atol=1e-9)
    np.testing.assert_allclose(rotation_power(R, a) @ rotation_power(R, 1 - a), R, atol=1e-9)
