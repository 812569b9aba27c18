"""Primal-dual log-barrier solver for equality-constrained NLPs with bounds.

Solves  min f(w)  s.t.  c(w) = 0,  lb <= w <= ub  from exact first-order
information (gradient and sparse constraint Jacobian) and a positive
semidefinite objective-Hessian approximation.  Newton steps on the barrier
KKT system are globalized with an l1 exact-penalty merit function and a
fraction-to-the-boundary rule; singular KKT matrices are handled by diagonal
inertia regularization.  The solver is deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


@dataclass(frozen=True, eq=False)
class NlpProblem:
    """Callbacks over a flat decision vector of length n.

    `residual`/`jacobian` describe the equality constraints (may be empty);
    `hess(w, y)` returns a sparse PSD approximation of the Lagrangian
    Hessian (identity is used when absent).  `x_scale`/`r_scale` are
    nominal magnitudes used to condition the KKT system.
    """

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    residual: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], sparse.spmatrix] | None = None
    hess: Callable[[np.ndarray, np.ndarray], sparse.spmatrix] | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    r_scale: np.ndarray | None = None


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 200
    mu0: float = 1e-1
    mu_factor: float = 0.2
    mu_min: float = 1e-9
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    reg_floor: float = 1e-8
    boundary_frac: float = 0.995
    log: Callable[[str], None] | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.tol < 1.0):
            raise ValueError("tolerance must lie in (0, 1)")
        for name in ("max_iter", "mu0", "mu_factor", "mu_min", "armijo",
                     "backtrack", "min_step", "reg_floor", "boundary_frac"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    status: str  # converged | iteration-limit | line-search-failure | singular-kkt
    iterations: int
    stationarity: float
    feasibility: float
    complementarity: float
    objective: float
    wall_time: float
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _scaled(problem: NlpProblem) -> NlpProblem:
    """Rewrites the problem in scaled variables w_hat = w / x_scale."""
    s = problem.x_scale
    if s is None:
        return problem
    s = np.asarray(s, dtype=float)
    d = problem.r_scale
    ds = sparse.diags(s)
    dd = sparse.diags(d) if d is not None else None

    def residual(wh):
        r = problem.residual(s * wh)
        return d * r if d is not None else r

    def jac(wh):
        j = problem.jacobian(s * wh).tocsr() @ ds
        return dd @ j if dd is not None else j

    hess = None
    if problem.hess is not None:
        hess = lambda wh, y: ds @ problem.hess(s * wh, y) @ ds

    def bound(b, default):
        return b / s if b is not None else np.full(problem.n, default)

    return NlpProblem(
        n=problem.n,
        objective=lambda wh: problem.objective(s * wh),
        gradient=lambda wh: s * problem.gradient(s * wh),
        residual=residual if problem.residual is not None else None,
        jacobian=jac if problem.jacobian is not None else None,
        hess=hess,
        lb=bound(problem.lb, -np.inf),
        ub=bound(problem.ub, np.inf),
    )


def kkt_residuals(problem: NlpProblem, w: np.ndarray, y: np.ndarray,
                  z_lb: np.ndarray | None = None, z_ub: np.ndarray | None = None,
                  mu: float = 0.0) -> tuple[float, float, float]:
    """Scaled inf-norm KKT residuals (stationarity, feasibility, complementarity)."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    g = problem.gradient(w)
    if problem.residual is not None and y.size:
        g = g + problem.jacobian(w).T @ y
    lb = problem.lb if problem.lb is not None else np.full(problem.n, -np.inf)
    ub = problem.ub if problem.ub is not None else np.full(problem.n, np.inf)
    z_lb = np.zeros(problem.n) if z_lb is None else z_lb
    z_ub = np.zeros(problem.n) if z_ub is None else z_ub
    g = g - z_lb + z_ub
    c = problem.residual(w) if problem.residual is not None else np.zeros(0)

    s_max = 100.0
    n_mult = y.size + z_lb.size + z_ub.size
    s_d = max(s_max, (np.abs(y).sum() + np.abs(z_lb).sum() + np.abs(z_ub).sum())
              / max(n_mult, 1)) / s_max
    s_c = max(s_max, (np.abs(z_lb).sum() + np.abs(z_ub).sum())
              / max(z_lb.size + z_ub.size, 1)) / s_max
    stat = np.max(np.abs(g)) / s_d if g.size else 0.0
    feas = np.max(np.abs(c)) if c.size else 0.0
    gap_lo = np.where(np.isfinite(lb), w - lb, 1.0)
    gap_hi = np.where(np.isfinite(ub), ub - w, 1.0)
    comp_lo = np.where(np.isfinite(lb), gap_lo * z_lb - mu, 0.0)
    comp_hi = np.where(np.isfinite(ub), gap_hi * z_ub - mu, 0.0)
    comp = max(np.max(np.abs(comp_lo)), np.max(np.abs(comp_hi))) / s_c
    return float(stat), float(feas), float(comp)


def _project_interior(w, lb, ub, margin=1e-2):
    w = w.copy()
    lo = np.isfinite(lb)
    hi = np.isfinite(ub)
    pad_lo = np.where(lo, margin * np.maximum(1.0, np.abs(lb)), 0.0)
    pad_hi = np.where(hi, margin * np.maximum(1.0, np.abs(ub)), 0.0)
    both = lo & hi
    width = np.where(both, ub - lb, np.inf)
    pad_lo = np.minimum(pad_lo, width / 4.0)
    pad_hi = np.minimum(pad_hi, width / 4.0)
    w = np.where(lo, np.maximum(w, lb + pad_lo), w)
    w = np.where(hi, np.minimum(w, ub - pad_hi), w)
    return w


def _max_step(v, dv, limit, frac):
    """Largest alpha <= 1 with v + alpha dv >= (1 - frac) spacing from limit."""
    gap = v - limit
    bad = dv < 0.0
    if not np.any(bad):
        return 1.0
    alpha = frac * gap[bad] / (-dv[bad])
    return float(min(1.0, alpha.min()))


def solve(problem: NlpProblem, w0: np.ndarray,
          opts: SolverOptions = SolverOptions()) -> tuple[np.ndarray, SolveReport]:
    """Solve the NLP from w0 (projected strictly inside the bounds)."""
    t_start = time.perf_counter()
    scale = problem.x_scale
    prob = _scaled(problem)
    n = prob.n
    lb = prob.lb if prob.lb is not None else np.full(n, -np.inf)
    ub = prob.ub if prob.ub is not None else np.full(n, np.inf)
    lo_mask = np.isfinite(lb)
    hi_mask = np.isfinite(ub)
    has_eq = prob.residual is not None

    w = np.asarray(w0, dtype=float).copy()
    if scale is not None:
        w = w / scale
    w = _project_interior(w, lb, ub)

    mu = opts.mu0
    c = prob.residual(w) if has_eq else np.zeros(0)
    m = c.size
    y = np.zeros(m)
    z_lb = np.where(lo_mask, mu / np.maximum(w - lb, 1e-12), 0.0)
    z_ub = np.where(hi_mask, mu / np.maximum(ub - w, 1e-12), 0.0)
    nu = 1.0  # penalty weight of the merit function

    def barrier_value(w_):
        val = prob.objective(w_)
        if np.any(lo_mask):
            gap = (w_ - lb)[lo_mask]
            if np.any(gap <= 0.0):
                return np.inf
            val -= mu * np.log(gap).sum()
        if np.any(hi_mask):
            gap = (ub - w_)[hi_mask]
            if np.any(gap <= 0.0):
                return np.inf
            val -= mu * np.log(gap).sum()
        return val

    def log(line):
        if opts.log is not None:
            opts.log(line)

    status = "iteration-limit"
    message = ""
    it = 0
    log("iter        objective       stat       feas       comp         mu      alpha")
    for it in range(1, opts.max_iter + 1):
        g = prob.gradient(w)
        c = prob.residual(w) if has_eq else np.zeros(0)
        jac = prob.jacobian(w).tocsc() if has_eq else sparse.csc_matrix((0, n))

        stat, feas, comp = kkt_residuals(prob, w, y, z_lb, z_ub, mu=0.0)
        err0 = max(stat, feas, comp)
        if err0 <= opts.tol:
            status = "converged"
            log(f"{it - 1:4d}  {prob.objective(w):15.8e}  {stat:9.2e}  {feas:9.2e}  {comp:9.2e}  {mu:9.2e}      -")
            break

        _, _, comp_mu = kkt_residuals(prob, w, y, z_lb, z_ub, mu=mu)
        err_mu = max(stat, feas, comp_mu)
        while err_mu <= 10.0 * mu and mu > opts.mu_min:
            mu = max(opts.mu_min, min(opts.mu_factor * mu, mu**1.5))
            _, _, comp_mu = kkt_residuals(prob, w, y, z_lb, z_ub, mu=mu)
            err_mu = max(stat, feas, comp_mu)

        gap_lo = np.where(lo_mask, w - lb, 1.0)
        gap_hi = np.where(hi_mask, ub - w, 1.0)
        sigma = np.where(lo_mask, z_lb / gap_lo, 0.0) + np.where(hi_mask, z_ub / gap_hi, 0.0)
        grad_barrier = g - np.where(lo_mask, mu / gap_lo, 0.0) + np.where(hi_mask, mu / gap_hi, 0.0)

        if prob.hess is not None:
            hess = prob.hess(w, y).tocsc()
        else:
            hess = sparse.identity(n, format="csc")

        stat_grad = grad_barrier + (jac.T @ y) if m else grad_barrier
        rhs = -np.concatenate([stat_grad, c])
        feas_l1 = np.abs(c).sum()
        delta_w = 0.0
        step = None
        while True:
            h_bar = hess + sparse.diags(sigma + delta_w)
            kkt = sparse.bmat(
                [[h_bar, jac.T if m else None],
                 [jac if m else None, -sparse.identity(m) * 1e-12 if m else None]],
                format="csc") if m else h_bar.tocsc()
            try:
                step = splu(kkt).solve(rhs)
            except RuntimeError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                dw = step[:n]
                nu_trial = max(nu, 1.2 * (np.max(np.abs(y + step[n:])) if m else 0.0) + 0.1)
                d_merit = float(grad_barrier @ dw) - nu_trial * feas_l1
                tiny = 1e-14 * max(1.0, np.abs(grad_barrier).max()) * max(1.0, np.abs(dw).max())
                if d_merit < -tiny or abs(d_merit) <= tiny:
                    nu = nu_trial
                    break
            if delta_w == 0.0:
                delta_w = opts.reg_floor
            else:
                delta_w *= 10.0
            if delta_w > 1e12:
                status = "singular-kkt"
                message = "KKT matrix singular beyond maximum regularization"
                break
        if status == "singular-kkt":
            break

        dw = step[:n]
        dy = step[n:] if m else np.zeros(0)
        dz_lb = np.where(lo_mask, mu / gap_lo - z_lb - z_lb / gap_lo * dw, 0.0)
        dz_ub = np.where(hi_mask, mu / gap_hi - z_ub + z_ub / gap_hi * dw, 0.0)

        alpha_max = min(_max_step(w, dw, lb, opts.boundary_frac) if np.any(lo_mask) else 1.0,
                        _max_step(-w, -dw, -ub, opts.boundary_frac) if np.any(hi_mask) else 1.0)
        alpha_z = min(_max_step(z_lb[lo_mask], dz_lb[lo_mask], 0.0, opts.boundary_frac) if np.any(lo_mask) else 1.0,
                      _max_step(z_ub[hi_mask], dz_ub[hi_mask], 0.0, opts.boundary_frac) if np.any(hi_mask) else 1.0)

        merit0 = barrier_value(w) + nu * np.abs(c).sum()
        d_merit = float(grad_barrier @ dw) - nu * np.abs(c).sum()
        alpha = alpha_max
        accepted = False
        while alpha >= opts.min_step:
            w_trial = w + alpha * dw
            c_trial = prob.residual(w_trial) if has_eq else np.zeros(0)
            merit = barrier_value(w_trial) + nu * np.abs(c_trial).sum()
            if merit <= merit0 + opts.armijo * alpha * d_merit:
                accepted = True
                break
            alpha *= opts.backtrack
        if not accepted:
            status = "line-search-failure"
            message = f"line search stalled at iteration {it}"
            break

        w = w + alpha * dw
        y = y + alpha * dy
        z_lb = np.where(lo_mask, z_lb + alpha_z * dz_lb, 0.0)
        z_ub = np.where(hi_mask, z_ub + alpha_z * dz_ub, 0.0)
        # keep the bound multipliers within a factor of the barrier estimate
        kappa = 1e10
        gap_lo = np.where(lo_mask, w - lb, 1.0)
        gap_hi = np.where(hi_mask, ub - w, 1.0)
        z_lb = np.where(lo_mask, np.clip(z_lb, mu / (kappa * gap_lo), kappa * mu / gap_lo), 0.0)
        z_ub = np.where(hi_mask, np.clip(z_ub, mu / (kappa * gap_hi), kappa * mu / gap_hi), 0.0)

        log(f"{it:4d}  {prob.objective(w):15.8e}  {stat:9.2e}  {feas:9.2e}  {comp:9.2e}  {mu:9.2e}  {alpha:9.2e}")
    else:
        it = opts.max_iter

    stat, feas, comp = kkt_residuals(prob, w, y, z_lb, z_ub, mu=0.0)
    if status == "iteration-limit" and max(stat, feas, comp) <= opts.tol:
        status = "converged"
    w_out = w * scale if scale is not None else w
    report = SolveReport(
        status=status,
        iterations=it,
        stationarity=stat,
        feasibility=feas,
        complementarity=comp,
        objective=float(prob.objective(w)),
        wall_time=time.perf_counter() - t_start,
        message=message,
    )
    return w_out, report
