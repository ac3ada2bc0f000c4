"""Benchmark protocols and their CSV reports.

Instance seeds come from ``numpy.random.SeedSequence`` keyed by
``(base_seed, protocol, n, round(1000 p), k)`` for ``fig2``/``fig3`` and by
``(base_seed, protocol, axis, k)`` for ``toy``; the toy key omits sigma so a
sigma sweep reuses the same noise draws.

CSV columns (``instances.csv``), blank where not applicable:

    protocol, n_cams, p, sigma, axis, instance, seed, method, status,
    iterations, rank, tight, relative_gap, chordal_err, mahalanobis_err,
    rms_angular_deg, runtime_s, percent_indefinite

``summary.csv`` has one row per (protocol, n_cams, p, sigma, axis, method):

    protocol, n_cams, p, sigma, axis, method, count, optimal_fraction,
    rank3_fraction, tight_fraction, median_chordal_err,
    median_mahalanobis_err, median_rms_angular_deg, median_runtime_s,
    median_iterations
"""
from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import write_atomic
from .pipeline import run_method
from .solver import SolverSettings
from .synth import SynthConfig, generate, toy_three_cam

INSTANCE_COLUMNS = [
    "protocol", "n_cams", "p", "sigma", "axis", "instance", "seed", "method", "status",
    "iterations", "rank", "tight", "relative_gap", "chordal_err", "mahalanobis_err",
    "rms_angular_deg", "runtime_s", "percent_indefinite",
]
SUMMARY_COLUMNS = [
    "protocol", "n_cams", "p", "sigma", "axis", "method", "count", "optimal_fraction",
    "rank3_fraction", "tight_fraction", "median_chordal_err", "median_mahalanobis_err",
    "median_rms_angular_deg", "median_runtime_s", "median_iterations",
]
GROUP_KEYS = ("protocol", "n_cams", "p", "sigma", "axis", "method")

PROTOCOL_IDS = {"fig2": 2, "fig3": 3, "toy": 4}
AXIS_IDS = {"x": 0, "y": 1, "z": 2}

DEFAULTS = {
    "fig2": dict(n_range=(15,), p_list=(1.0,), cov_eig_range=(0.1, 1.0),
                 methods=("o3-aniso", "cso3-aniso")),
    "fig3": dict(n_range=(5, 10, 20), p_list=(0.4, 0.8), cov_eig_range=(0.01, 0.1),
                 methods=("o3-iso", "o3-aniso", "cso3-iso", "cso3-aniso")),
    "toy": dict(sigmas=(0.01, 0.05, 0.1, 0.2, 0.3), axes=("x", "y", "z"), eps=1e-3,
                methods=("o3-iso", "o3-aniso", "cso3-iso", "cso3-aniso", "spectral")),
}


def instance_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


@dataclass(frozen=True)
class Job:
    protocol: str
    instance: int
    seed: int
    methods: tuple[str, ...]
    n_cams: int = 0
    p: float | None = None
    cov_eig_range: tuple[float, float] | None = None
    sigma: float | None = None
    axis: str | None = None
    eps: float = 1e-3


def plan(
    protocol: str,
    instances: int,
    seed: int = 0,
    n_range: Sequence[int] | None = None,
    p_list: Sequence[float] | None = None,
    cov_eig_range: tuple[float, float] | None = None,
    sigmas: Sequence[float] | None = None,
    axes: Sequence[str] | None = None,
    methods: Sequence[str] | None = None,
) -> list[Job]:
    if protocol not in DEFAULTS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {sorted(DEFAULTS)}")
    d = DEFAULTS[protocol]
    methods = tuple(methods or d["methods"])
    pid = PROTOCOL_IDS[protocol]
    jobs = []
    if protocol == "toy":
        for axis, sigma, k in itertools.product(axes or d["axes"], sigmas or d["sigmas"], range(instances)):
            s = instance_seed(seed, pid, AXIS_IDS[axis], k)
            jobs.append(Job(protocol, k, s, methods, 3, sigma=float(sigma), axis=axis, eps=d["eps"]))
        return jobs
    cov = tuple(cov_eig_range or d["cov_eig_range"])
    for n, p, k in itertools.product(n_range or d["n_range"], p_list or d["p_list"], range(instances)):
        s = instance_seed(seed, pid, n, round(1000 * p), k)
        jobs.append(Job(protocol, k, s, methods, int(n), p=float(p), cov_eig_range=cov))
    return jobs


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if not np.isfinite(v):
            return ""
        return repr(v)
    return str(v)


def run_job(job: Job, settings: SolverSettings | None = None) -> list[dict]:
    if job.protocol == "toy":
        inst = toy_three_cam(job.sigma, job.axis, job.eps, job.seed)
    else:
        inst = generate(SynthConfig(job.n_cams, job.p, job.cov_eig_range, job.seed))
    rows = []
    for method in job.methods:
        out = run_method(inst.n_cams, inst.edges, method, settings, ground_truth=inst.ground_truth)
        cert = out.certificate
        rows.append({
            "protocol": job.protocol,
            "n_cams": inst.n_cams,
            "p": job.p,
            "sigma": job.sigma,
            "axis": job.axis,
            "instance": job.instance,
            "seed": job.seed,
            "method": method,
            "status": out.solver.status.value if out.solver else "Optimal",
            "iterations": out.solver.iterations if out.solver else None,
            "rank": cert.rank_estimate if cert else None,
            "tight": cert.tight if cert else None,
            "relative_gap": cert.relative_gap if cert else None,
            "chordal_err": out.metrics.chordal_err,
            "mahalanobis_err": out.metrics.mahalanobis_err,
            "rms_angular_deg": out.metrics.rms_angular_deg,
            "runtime_s": out.runtime_s,
            "percent_indefinite": out.percent_indefinite,
        })
    return rows


def run(jobs: Iterable[Job], settings: SolverSettings | None = None, n_jobs: int = 1) -> list[dict]:
    jobs = list(jobs)
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(run_job, jobs, itertools.repeat(settings)))
    else:
        chunks = [run_job(j, settings) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def summarize(rows: Sequence[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in GROUP_KEYS), []).append(r)

    def med(rs, key):
        vals = [r[key] for r in rs if r[key] is not None]
        return float(np.median(vals)) if vals else None

    def frac(rs, pred, key):
        vals = [r for r in rs if r[key] is not None]
        return float(np.mean([pred(r) for r in vals])) if vals else None

    out = []
    for key, rs in groups.items():
        row = dict(zip(GROUP_KEYS, key))
        row.update(
            count=len(rs),
            optimal_fraction=float(np.mean([r["status"] == "Optimal" for r in rs])),
            rank3_fraction=frac(rs, lambda r: r["rank"] == 3, "rank"),
            tight_fraction=frac(rs, lambda r: bool(r["tight"]), "tight"),
            median_chordal_err=med(rs, "chordal_err"),
            median_mahalanobis_err=med(rs, "mahalanobis_err"),
            median_rms_angular_deg=med(rs, "rms_angular_deg"),
            median_runtime_s=med(rs, "runtime_s"),
            median_iterations=med(rs, "iterations"),
        )
        out.append(row)
    return out


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_outputs(out_dir: str | Path, rows: Sequence[dict]) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inst_path, summ_path = out_dir / "instances.csv", out_dir / "summary.csv"
    write_atomic(inst_path, to_csv(rows, INSTANCE_COLUMNS))
    write_atomic(summ_path, to_csv(summarize(rows), SUMMARY_COLUMNS))
    return inst_path, summ_path
