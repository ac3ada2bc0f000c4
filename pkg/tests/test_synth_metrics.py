import numpy as np
import pytest

from oracles import random_rotations
from rotavg.cost import EdgeMeasurement
from rotavg.metrics import (
    angular_errors,
    camera_hessians,
    chordal_error,
    evaluate,
    mahalanobis_error,
    rms_angular_error,
)
from rotavg.so3 import exp_map, is_rotation, log_map
from rotavg.synth import SynthConfig, _noisy_edge, generate, toy_three_cam


def test_complete_graph_edge_count():
    inst = generate(SynthConfig(4, 1.0, seed=0))
    assert sorted((e.i, e.j) for e in inst.edges) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert len(inst.ground_truth) == 4
    assert all(is_rotation(r) for r in inst.ground_truth)


def test_generation_deterministic():
    a = generate(SynthConfig(7, 0.5, seed=42))
    b = generate(SynthConfig(7, 0.5, seed=42))
    c = generate(SynthConfig(7, 0.5, seed=43))
    assert [(e.i, e.j) for e in a.edges] == [(e.i, e.j) for e in b.edges]
    for x, y in zip(a.edges, b.edges):
        np.testing.assert_array_equal(x.r_tilde, y.r_tilde)
        np.testing.assert_array_equal(x.h, y.h)
    assert not np.array_equal(a.ground_truth[0], c.ground_truth[0])
    assert a.metadata["prng"] == "numpy.PCG64"


def test_sparse_graphs_are_connected():
    from rotavg.cost import is_connected

    for seed in range(30):
        inst = generate(SynthConfig(10, 0.1, seed=seed))
        assert is_connected(10, [(e.i, e.j) for e in inst.edges])


def test_hessian_eigenvalues_within_bounds():
    lo, hi = 0.01, 0.1
    inst = generate(SynthConfig(10, 1.0, (lo, hi), seed=5))
    for e in inst.edges:
        eig = np.linalg.eigvalsh(e.h)
        assert eig.min() >= 1 / hi * (1 - 1e-9)
        assert eig.max() <= 1 / lo * (1 + 1e-9)


def test_noise_covariance_matches_inverse_hessian(rng):
    Q = random_rotations(rng, 1)[0]
    eigs = np.array([0.01, 0.03, 0.08])
    Ri, Rj = random_rotations(rng, 2)
    xi = rng.standard_normal((100_000, 3))
    dws = np.array([log_map(_noisy_edge(0, 1, Ri, Rj, Q, eigs, x).r_tilde @ (Ri @ Rj.T).T) for x in xi])
    cov = np.cov(dws.T)
    target = Q @ np.diag(eigs) @ Q.T
    assert np.linalg.norm(cov - target) <= 0.05 * np.linalg.norm(target)
    h = _noisy_edge(0, 1, Ri, Rj, Q, eigs, xi[0]).h
    np.testing.assert_allclose(h @ target, np.eye(3), atol=1e-9)


def test_noise_free_edges_are_exact():
    inst = generate(SynthConfig(5, 1.0, seed=1, noise=False))
    gt = inst.ground_truth
    for e in inst.edges:
        np.testing.assert_allclose(e.r_tilde, gt[e.i] @ gt[e.j].T, atol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(5, 0.0)
    with pytest.raises(ValueError):
        SynthConfig(5, 1.0, (0.1, 0.01))
    with pytest.raises(ValueError):
        SynthConfig(1)


def test_toy_hessians():
    inst = toy_three_cam(0.3, "x", 1e-3, seed=0)
    h = {(e.i, e.j): e.h for e in inst.edges}
    np.testing.assert_allclose(h[(0, 2)], np.diag([1 / 0.3, 1000, 1000]), rtol=1e-12)
    np.testing.assert_allclose(h[(0, 1)], 1000 * np.eye(3), rtol=1e-12)
    inst = toy_three_cam(0.3, "z", 1e-3, seed=0)
    np.testing.assert_allclose(inst.edges[2].h, np.diag([1000, 1000, 1 / 0.3]), rtol=1e-12)


def test_toy_common_random_numbers():
    a = toy_three_cam(0.01, "y", seed=9)
    b = toy_three_cam(0.3, "y", seed=9)
    for x, y in zip(a.ground_truth, b.ground_truth):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a.edges[0].r_tilde, b.edges[0].r_tilde)
    with pytest.raises(ValueError):
        toy_three_cam(0.0)
    with pytest.raises(ValueError):
        toy_three_cam(0.1, "w")


def test_chordal_half_turn_example():
    Rz = np.diag([-1.0, -1, 1])
    assert chordal_error([np.eye(3), np.eye(3)], [np.eye(3), Rz]) == pytest.approx(2 * np.sqrt(2))
    assert chordal_error([np.eye(3)], [Rz]) == pytest.approx(0.0, abs=1e-12)


def test_angular_example():
    a = np.radians(10.0)
    gt = [np.eye(3), np.eye(3)]
    est = [exp_map([0, 0, a]), exp_map([0, 0, -a])]
    np.testing.assert_allclose(angular_errors(gt, est), [a, a], atol=1e-12)
    assert rms_angular_error(gt, est) == pytest.approx(10.0)
    est = [np.eye(3), np.eye(3), exp_map([0, 0, 2.0])]
    # Errors after alignment are unequal; RMS combines them quadratically.
    th = angular_errors([np.eye(3)] * 3, est)
    assert rms_angular_error([np.eye(3)] * 3, est) == pytest.approx(np.degrees(np.sqrt(np.mean(th**2))))


def test_metrics_gauge_invariant(rng):
    gt = list(random_rotations(rng, 5))
    est = [exp_map(0.1 * rng.standard_normal(3)) @ g for g in gt]
    W = random_rotations(rng, 1)[0]
    moved = [e @ W for e in est]
    edges = [EdgeMeasurement(i, i + 1, gt[i] @ gt[i + 1].T, np.eye(3)) for i in range(4)]
    a, b = evaluate(gt, est, edges), evaluate(gt, moved, edges)
    assert a.chordal_err == pytest.approx(b.chordal_err, rel=1e-9)
    assert a.rms_angular_deg == pytest.approx(b.rms_angular_deg, rel=1e-9)
    assert a.mahalanobis_err == pytest.approx(b.mahalanobis_err, rel=1e-6)


def test_mahalanobis_sign_branch():
    t = np.pi - 0.01
    gt = [exp_map([t, 0, 0]), np.eye(3)]
    est = [exp_map([-t, 0, 0]), np.eye(3)]
    edges = [EdgeMeasurement(0, 1, gt[0], np.eye(3))]
    # w - w* is large, w + w* vanishes; the metric takes the smaller.
    assert mahalanobis_error(gt, est, edges, align=False) == pytest.approx(0.0, abs=1e-9)


def test_mahalanobis_scaling_and_value(rng):
    gt = [np.eye(3), np.eye(3)]
    est = [exp_map([0.1, 0, 0]), np.eye(3)]
    h = np.diag([4.0, 1.0, 1.0])
    e1 = [EdgeMeasurement(0, 1, np.eye(3), h)]
    e4 = [EdgeMeasurement(0, 1, np.eye(3), 4 * h)]
    v1 = mahalanobis_error(gt, est, e1, align=False)
    assert v1 == pytest.approx(np.sqrt(0.01 * 4.0))
    assert mahalanobis_error(gt, est, e4, align=False) == pytest.approx(2 * v1)


def test_camera_hessians_reverse_frame(rng):
    rt = random_rotations(rng, 1)[0]
    h = np.diag([1.0, 2.0, 3.0])
    H = camera_hessians([EdgeMeasurement(0, 1, rt, h)], 2)
    np.testing.assert_allclose(H[0], h)
    np.testing.assert_allclose(H[1], rt.T @ h @ rt, atol=1e-12)


def test_mahalanobis_length_mismatch():
    with pytest.raises(ValueError):
        mahalanobis_error([np.eye(3)], [np.eye(3), np.eye(3)], [])
