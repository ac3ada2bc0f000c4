import numpy as np
import pytest

from oracles import random_rotations
from rotavg.cost import EdgeMeasurement, assemble_cost, objective_value
from rotavg.metrics import chordal_error
from rotavg.pipeline import run_method
from rotavg.rounding import certify, estimate_rank, rank3_factor, round_to_rotations
from rotavg.sdp import build_program
from rotavg.solver import SolverSettings, solve
from rotavg.spectral import spectral_solve
from rotavg.synth import SynthConfig, generate


def test_estimate_rank_examples():
    assert estimate_rank(np.diag([1.0, 1, 1, 0, 0, 0])) == 3
    assert estimate_rank(np.diag([1.0, 1, 1, 1e-5])) == 3
    assert estimate_rank(np.diag([1.0, 1, 1, 0.01])) == 4
    assert estimate_rank(np.diag([5.0, 0, 0])) == 1
    assert estimate_rank(np.zeros((6, 6))) == 0
    assert estimate_rank(np.eye(6)) == 6


def test_round_exact_gram(rng):
    gt = list(random_rotations(rng, 7))
    R = np.vstack(gt)
    rots, degenerate, dets = round_to_rotations(R @ R.T, full=True)
    assert not degenerate
    assert all(d > 0 for d in dets)
    assert chordal_error(gt, rots) < 1e-10


def test_round_fixes_reflected_coset(rng):
    # eigh may return the factor in either O(3) coset; the result must not depend on it.
    gt = list(random_rotations(rng, 5))
    R = np.vstack(gt) @ np.diag([1.0, 1, -1])
    V, _ = rank3_factor(R @ R.T)
    assert sum(np.linalg.det(V.reshape(-1, 3, 3)) > 0) == 5
    assert chordal_error(gt, round_to_rotations(R @ R.T)) < 1e-10


def test_rank3_factor_degenerate_flag():
    _, deg = rank3_factor(np.diag([1.0, 1, 0, 0, 0, 0]))
    assert deg


def test_certificate_noise_free_tight():
    inst = generate(SynthConfig(6, 0.8, seed=3, noise=False))
    cost = assemble_cost(inst.edges, 6, "aniso")
    prog = build_program(cost, "cso3-aniso")
    res = solve(prog)
    cert, rots = certify(cost, prog, res)
    assert cert.rank_estimate == 3
    assert cert.tight
    assert abs(cert.relative_gap) < 1e-4
    assert cert.rounded_cost == pytest.approx(objective_value(cost, rots))
    assert chordal_error(inst.ground_truth, rots) < 1e-3


def test_certify_rejects_unsolved():
    inst = generate(SynthConfig(5, 1.0, seed=1))
    cost = assemble_cost(inst.edges, 5, "aniso")
    prog = build_program(cost, "cso3-aniso")
    res = solve(prog, SolverSettings(max_iters=2))
    with pytest.raises(ValueError, match="MaxIters"):
        certify(cost, prog, res)


def test_gap_is_nonnegative_up_to_tolerance():
    for seed in range(3):
        inst = generate(SynthConfig(8, 0.6, (0.1, 1.0), seed=seed))
        for method in ("o3-aniso", "cso3-aniso", "o3-iso", "cso3-iso"):
            out = run_method(8, inst.edges, method)
            assert out.certificate.relative_gap > -1e-4


def test_spectral_noise_free_exact():
    for seed in range(5):
        inst = generate(SynthConfig(8, 0.5, (0.01, 1.0), seed=seed, noise=False))
        rots = spectral_solve(inst.edges, 8)
        assert chordal_error(inst.ground_truth, rots) < 1e-8
        rots = spectral_solve(inst.edges, 8, mode="iso")
        assert chordal_error(inst.ground_truth, rots) < 1e-8


def test_spectral_errors():
    e = EdgeMeasurement(0, 1, np.eye(3), np.eye(3))
    with pytest.raises(ValueError, match="disconnected"):
        spectral_solve([e], 3)
    with pytest.raises(ValueError, match="singular"):
        spectral_solve([EdgeMeasurement(0, 1, np.eye(3), np.diag([1.0, 1, 2]))], 2)


def test_pipeline_methods_agree_noise_free():
    inst = generate(SynthConfig(6, 1.0, (0.01, 0.02), seed=11, noise=False))
    for method in ("o3-iso", "o3-aniso", "cso3-iso", "cso3-aniso", "spectral"):
        out = run_method(6, inst.edges, method, ground_truth=inst.ground_truth)
        assert out.optimal
        assert out.metrics.chordal_err < 1e-3, method
        if out.certificate is not None:
            assert out.certificate.tight, method


def test_pipeline_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        run_method(2, [EdgeMeasurement(0, 1, np.eye(3), np.eye(3))], "magic")


def test_estimate_rank_planted_and_scale(rng):
    assert estimate_rank(np.eye(12)) == 12
    R = np.vstack(random_rotations(rng, 4))
    X = R @ R.T
    assert estimate_rank(X) == 3
    G = rng.standard_normal((12, 12))
    assert estimate_rank(X + 1e-6 * G @ G.T) == 3
    for s in (1e-3, 7.0, 1e4):
        assert estimate_rank(s * (X + 0.01 * G @ G.T)) == estimate_rank(X + 0.01 * G @ G.T)


def test_round_block_identity_degenerate():
    rots, degenerate, _ = round_to_rotations(np.eye(12), full=True)
    assert len(rots) == 4
    for r in rots:
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)
