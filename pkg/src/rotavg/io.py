"""Problem and report files.

Problem file (JSON, UTF-8)::

    {
      "format": "rotavg-problem",
      "version": 1,
      "n_cams": 3,
      "edges": [
        {"i": 0, "j": 1, "r_tilde": [9 floats, row-major], "hessian": [9 floats, row-major]},
        ...
      ],
      "ground_truth": [[9 floats, row-major], ...],   # optional, one per camera
      "metadata": {...}                                # optional, free-form
    }

Rotations are always stored as matrices, never as angles.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cost import EdgeMeasurement
from .so3 import check_rotation

PROBLEM_FORMAT = "rotavg-problem"
REPORT_FORMAT = "rotavg-report"
FORMAT_VERSION = 1
FILE_ROTATION_TOL = 1e-6


class ProblemFormatError(ValueError):
    """Invalid problem file; the message names the offending item and invariant."""


@dataclass
class Problem:
    n_cams: int
    edges: list[EdgeMeasurement]
    ground_truth: list[np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)


def _matrix(values, what: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFormatError(f"{what}: expected 9 numbers") from None
    if arr.shape != (9,):
        raise ProblemFormatError(f"{what}: expected 9 numbers, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemFormatError(f"{what}: non-finite entries")
    return arr.reshape(3, 3)


def _as_index(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFormatError(f"{what}: camera index must be an integer, got {value!r}")
    return value


def parse_problem(data: bytes | str) -> Problem:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProblemFormatError("top level must be an object")
    if doc.get("format") != PROBLEM_FORMAT:
        raise ProblemFormatError(f"format tag must be {PROBLEM_FORMAT!r}, got {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ProblemFormatError(f"unsupported version {doc.get('version')!r} (expected {FORMAT_VERSION})")
    n = doc.get("n_cams")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ProblemFormatError(f"n_cams must be a positive integer, got {n!r}")
    raw_edges = doc.get("edges")
    if not isinstance(raw_edges, list):
        raise ProblemFormatError("edges must be a list")

    edges = []
    seen: set[tuple[int, int]] = set()
    for k, raw in enumerate(raw_edges):
        if not isinstance(raw, dict):
            raise ProblemFormatError(f"edge #{k}: must be an object")
        i = _as_index(raw.get("i"), f"edge #{k}")
        j = _as_index(raw.get("j"), f"edge #{k}")
        what = f"edge #{k} ({i}, {j})"
        if not (0 <= i < n and 0 <= j < n):
            raise ProblemFormatError(f"{what}: camera index out of range for n_cams={n}")
        if i == j:
            raise ProblemFormatError(f"{what}: self-loop")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ProblemFormatError(f"{what}: duplicate measurement for this pair")
        seen.add(key)
        r = _matrix(raw.get("r_tilde"), f"{what} r_tilde")
        h = _matrix(raw.get("hessian"), f"{what} hessian")
        try:
            check_rotation(r, FILE_ROTATION_TOL, f"{what} r_tilde")
            edges.append(EdgeMeasurement(i, j, r, h))
        except ValueError as exc:
            msg = str(exc)
            raise ProblemFormatError(msg if msg.startswith(what) else f"{what}: {msg}") from None

    gt = None
    if doc.get("ground_truth") is not None:
        raw_gt = doc["ground_truth"]
        if not isinstance(raw_gt, list) or len(raw_gt) != n:
            raise ProblemFormatError(f"ground_truth must list {n} rotations")
        gt = []
        for k, vals in enumerate(raw_gt):
            m = _matrix(vals, f"ground_truth #{k}")
            try:
                gt.append(check_rotation(m, FILE_ROTATION_TOL, f"ground_truth #{k}"))
            except ValueError as exc:
                raise ProblemFormatError(str(exc)) from None
    meta = doc.get("metadata") or {}
    if not isinstance(meta, dict):
        raise ProblemFormatError("metadata must be an object")
    return Problem(n, edges, gt, meta)


def _flat(m: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(m, dtype=float).reshape(9)]


def dump_problem(problem: Problem) -> str:
    doc = {
        "format": PROBLEM_FORMAT,
        "version": FORMAT_VERSION,
        "n_cams": problem.n_cams,
        "edges": [
            {"i": e.i, "j": e.j, "r_tilde": _flat(e.r_tilde), "hessian": _flat(e.h)} for e in problem.edges
        ],
    }
    if problem.ground_truth is not None:
        doc["ground_truth"] = [_flat(r) for r in problem.ground_truth]
    if problem.metadata:
        doc["metadata"] = problem.metadata
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_problem(path: str | os.PathLike) -> Problem:
    return parse_problem(Path(path).read_bytes())


def write_problem(path: str | os.PathLike, problem: Problem) -> None:
    write_atomic(path, dump_problem(problem))


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def build_report(outcome, settings, alpha: float, backend: str = "admm") -> dict:
    """JSON-ready solve report. ``wall_time``/``runtime_s`` are the only non-reproducible fields."""
    from dataclasses import asdict

    rep: dict = {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "method": outcome.method,
        "formulation": None if outcome.method == "spectral" else outcome.method,
        "alpha": alpha,
        "backend": backend,
        "settings": asdict(settings),
        "percent_indefinite": outcome.percent_indefinite,
        "rotations": [_flat(r) for r in outcome.rotations],
        "wall_time": outcome.runtime_s,
    }
    if outcome.solver is not None:
        s = outcome.solver
        rep["solver"] = {
            "status": s.status.value,
            "iterations": s.iterations,
            "primal_objective": _finite_or_none(s.primal_objective),
            "dual_objective": _finite_or_none(s.dual_objective),
            "residuals": [_finite_or_none(v) for v in s.residuals],
        }
    if outcome.certificate is not None:
        c = outcome.certificate
        rep["certificate"] = {
            "rank_estimate": c.rank_estimate,
            "sdp_lower_bound": c.sdp_lower_bound,
            "rounded_cost": c.rounded_cost,
            "relative_gap": c.relative_gap,
            "tight": c.tight,
            "per_block_det": list(c.per_block_det),
            "degenerate": c.degenerate,
        }
    if outcome.metrics is not None:
        m = outcome.metrics
        rep["metrics"] = {
            "chordal_err": m.chordal_err,
            "mahalanobis_err": m.mahalanobis_err,
            "rms_angular_deg": m.rms_angular_deg,
            "runtime_s": m.runtime_s,
        }
    return rep


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True) + "\n"
