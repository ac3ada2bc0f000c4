"""First-order operator-splitting solver for :class:`~rotavg.sdp.ConicProgram`.

The embedded backend runs over-relaxed ADMM (Douglas-Rachford) on the split

    minimize  c^T x + I{A x = b}(x) + I_K(z)   subject to  x = z

    x <- projection of (z - u - c/rho) onto {A x = b}
    z <- Proj_K(alpha x + (1 - alpha) z + u)
    u <- u + alpha x + (1 - alpha) z_old - z

The affine projection reuses one sparse factorisation of ``A A^T``; it does
not depend on ``rho``, so the penalty can adapt freely. The cone projection
clamps negative eigenvalues of every PSD block. Rows of ``A`` and whole cone
blocks are equilibrated (Ruiz) before iterating.

Dual variables follow ``c + A^T y = s`` with ``s`` in K; at every check
``s = -rho u`` lies in K exactly and the returned primal ``z`` is PSD.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .sdp import ConicProgram, smat, svec, svec_dim

log = logging.getLogger(__name__)


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERS = "MaxIters"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    abs_feas: float = 1e-5
    rel_feas: float = 1e-6
    infeas_tol: float = 1e-8
    max_iters: int = 500_000
    rho: float = 1.0
    relaxation: float = 1.5
    adaptive_rho: bool = True
    adapt_every: int = 25
    check_every: int = 5
    scaling_iters: int = 10
    record_history: bool = False

    def __post_init__(self):
        for name in ("abs_feas", "rel_feas", "infeas_tol", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.max_iters < 1 or self.check_every < 1 or self.adapt_every < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class SolverResult:
    primal: np.ndarray
    dual: np.ndarray
    status: Status
    iterations: int
    primal_objective: float
    dual_objective: float
    residuals: tuple[float, float, float]
    wall_time: float
    history: list[tuple[int, float, float, float]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def psd_project(S: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix (works on stacks ``(..., d, d)``)."""
    S = np.asarray(S, dtype=float)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver failed in PSD projection: {exc}") from exc
    w = np.maximum(w, 0.0)
    return (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)


class _Cone:
    """Product of PSD cones in svec coordinates; same-size blocks projected as a stack."""

    def __init__(self, sizes, offsets):
        self.groups = []
        for d in sorted(set(sizes)):
            idx = [k for k, s in enumerate(sizes) if s == d]
            cols = np.concatenate([np.arange(offsets[k], offsets[k] + svec_dim(d)) for k in idx])
            self.groups.append((d, len(idx), cols))

    def project(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for d, count, cols in self.groups:
            blocks = smat(v[cols].reshape(count, svec_dim(d)), d)
            out[cols] = svec(psd_project(blocks)).ravel()
        return out

    def block_scalar(self, per_col: np.ndarray, reduce) -> np.ndarray:
        """Reduce a per-coordinate quantity to one value per cone block (broadcast back)."""
        out = np.empty_like(per_col)
        for d, count, cols in self.groups:
            vals = reduce(per_col[cols].reshape(count, svec_dim(d)), axis=1)
            out[cols] = np.repeat(vals, svec_dim(d))
        return out


def _equilibrate(A: sp.csr_matrix, cone: _Cone, iters: int):
    """Ruiz scaling ``D A E`` with ``E`` constant on each cone block (keeps K invariant)."""
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    As = A.tocsc(copy=True)
    for _ in range(iters):
        row = np.asarray(abs(As).max(axis=1).todense()).ravel()
        row = np.where(row > 0, row, 1.0)
        col = np.asarray(abs(As).max(axis=0).todense()).ravel()
        col = cone.block_scalar(np.where(col > 0, col, 1.0), np.max)
        dr = 1.0 / np.sqrt(row)
        dc = 1.0 / np.sqrt(col)
        As = sp.diags(dr) @ As @ sp.diags(dc)
        D *= dr
        E *= dc
    D = np.clip(D, 1e-4, 1e4)
    E = np.clip(E, 1e-4, 1e4)
    return D, E


def _inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def solve_admm(program: ConicProgram, settings: SolverSettings | None = None) -> SolverResult:
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    A, b, c = program.A.tocsr(), program.b, program.c
    cone = _Cone(program.cone_sizes, program.offsets)
    m, n = A.shape

    D, E = _equilibrate(A, cone, settings.scaling_iters)
    As = (sp.diags(D) @ A @ sp.diags(E)).tocsr()
    AsT = As.T.tocsr()
    bs = D * b
    cs = E * c
    sigma = 1.0 / max(1.0, _inf(cs))
    cs = sigma * cs

    if m > 0:
        try:
            lu = splu((As @ AsT).tocsc())
        except RuntimeError as exc:
            raise SolverError(f"factorisation of A A^T failed (rank-deficient equalities?): {exc}") from exc
        solve_normal = lu.solve
    else:
        solve_normal = None

    b_inf, c_inf = _inf(b), _inf(c)
    rho = settings.rho
    alpha = settings.relaxation
    z = np.zeros(n)
    u = np.zeros(n)
    w = np.zeros(m)
    y_prev = None
    z_prev_check = None
    status = Status.MAX_ITERS
    history = []
    pres = dres = gap = np.inf
    pobj = dobj = np.nan
    rho_changed = True
    it = 0

    for it in range(1, settings.max_iters + 1):
        v = z - u - cs / rho
        if solve_normal is not None:
            w = solve_normal(As @ v - bs)
            x = v - AsT @ w
        else:
            x = v
        xr = alpha * x + (1.0 - alpha) * z
        z_old = z
        z = cone.project(xr + u)
        u = u + xr - z

        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite iterate at iteration {it} (rho={rho:.3g})")

        check = it % settings.check_every == 0 or it == settings.max_iters
        adapt = settings.adaptive_rho and it % settings.adapt_every == 0
        if not (check or adapt):
            continue

        # Unscaled iterates: x = E z, y = D (rho w) / sigma, s = -(rho u) / (E sigma).
        # The z-step relation gives c + A^T y - s = E^{-1} r_hat / sigma with
        # r_hat = rho ((alpha - 1)(x - z_old) + z_old - z).
        x_u = E * z
        y_u = D * (rho * w) / sigma
        s_u = -(rho * u) / (E * sigma)
        Ax = A @ x_u
        ATy = A.T @ y_u
        r_p = Ax - b
        r_d = c + ATy - s_u
        pobj = float(c @ x_u)
        dobj = float(-(b @ y_u))
        pres, dres, gap = _inf(r_p), _inf(r_d), abs(pobj - dobj)
        eps_p = settings.abs_feas + settings.rel_feas * max(_inf(Ax), b_inf)
        eps_d = settings.abs_feas + settings.rel_feas * max(_inf(ATy), _inf(s_u), c_inf)
        eps_g = settings.abs_feas + settings.rel_feas * max(abs(pobj), abs(dobj))

        if check:
            if settings.record_history:
                history.append((it, pres, dres, gap))
            if pres <= eps_p and dres <= eps_d and gap <= eps_g:
                status = Status.OPTIMAL
                break
            if not rho_changed and y_prev is not None:
                found = _infeasibility(A, b, c, cone, y_u - y_prev, x_u - z_prev_check, settings.infeas_tol)
                if found is not None:
                    status = found
                    break
            y_prev, z_prev_check = y_u, x_u
            rho_changed = False

        if adapt:
            # Balance normalised primal and dual residuals (OSQP-style rule).
            ratio_p = pres / max(eps_p, 1e-300)
            ratio_d = dres / max(eps_d, 1e-300)
            if ratio_d > 0 and ratio_p > 0:
                new_rho = float(np.clip(rho * np.sqrt(ratio_p / ratio_d), 1e-6, 1e6))
                if new_rho > 5 * rho or new_rho < 0.2 * rho:
                    u *= rho / new_rho
                    rho = new_rho
                    rho_changed = True

    x_u = E * z
    y_u = D * (rho * w) / sigma
    wall = time.perf_counter() - t0
    log.debug("admm %s after %d iterations (rho=%.3g, %.2fs)", status.value, it, rho, wall)
    return SolverResult(
        primal=x_u,
        dual=y_u,
        status=status,
        iterations=it,
        primal_objective=pobj,
        dual_objective=dobj,
        residuals=(pres, dres, gap),
        wall_time=wall,
        history=history,
    )


def _infeasibility(A, b, c, cone: _Cone, dy, dx, tol):
    """Test successive-difference directions for Farkas-type certificates.

    Primal infeasible: ``b^T q = -1`` with ``A^T q`` in K (q along ``-dy``...).
    Dual infeasible:   ``c^T d = -1`` with ``A d = 0`` and ``d`` in K.
    """
    # The dual iterate diverges along q with b^T q < 0 and A^T q in K
    # (sign follows c + A^T y = s).
    bq = float(b @ dy)
    if bq < 0:
        q = dy / -bq
        g = A.T @ q
        if _inf(g - cone.project(g)) <= tol * max(1.0, _inf(q)):
            return Status.PRIMAL_INFEASIBLE
    cd = float(c @ dx)
    if cd < 0:
        d = dx / -cd
        if _inf(A @ d) <= tol * max(1.0, _inf(d)) and _inf(d - cone.project(d)) <= tol * max(1.0, _inf(d)):
            return Status.DUAL_INFEASIBLE
    return None


def solve_cvxpy(program: ConicProgram, settings: SolverSettings | None = None, solver: str = "CLARABEL") -> SolverResult:
    """Cross-check backend through cvxpy (optional dependency)."""
    import cvxpy as cp

    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    x = cp.Variable(program.dim)
    cons = []
    if program.n_eq:
        cons.append(program.A @ x == program.b)
    for k, d in enumerate(program.cone_sizes):
        o = program.offsets[k]
        S = cp.Variable((d, d), symmetric=True)
        cons.append(S >> 0)
        cons.append(x[o : o + svec_dim(d)] == _svec_expr(S, d))
    prob = cp.Problem(cp.Minimize(program.c @ x), cons)
    prob.solve(solver=solver)
    status = {
        cp.OPTIMAL: Status.OPTIMAL,
        cp.INFEASIBLE: Status.PRIMAL_INFEASIBLE,
        cp.UNBOUNDED: Status.DUAL_INFEASIBLE,
    }.get(prob.status, Status.MAX_ITERS)
    xv = np.asarray(x.value) if x.value is not None else np.full(program.dim, np.nan)
    y = -cons[0].dual_value if program.n_eq and cons[0].dual_value is not None else np.zeros(program.n_eq)
    pobj = float(program.c @ xv)
    dobj = float(-(program.b @ y))
    return SolverResult(xv, np.asarray(y), status, int(prob.solver_stats.num_iters or 0), pobj, dobj,
                        (float("nan"),) * 3, time.perf_counter() - t0)


def _svec_expr(S, d):
    import cvxpy as cp

    from .sdp import svec_indices

    rows, cols, scale = svec_indices(d)
    return cp.hstack([S[r, q] * s for r, q, s in zip(rows, cols, scale)])


BACKENDS = {"admm": solve_admm, "cvxpy": solve_cvxpy}


def solve(program: ConicProgram, settings: SolverSettings | None = None, backend: str = "admm") -> SolverResult:
    """Solve ``program`` with the named backend (the embedded ADMM by default)."""
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown solver backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return fn(program, settings)
