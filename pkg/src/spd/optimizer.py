"""Augmented-Lagrangian minimization with bound constraints.

The outer loop handles equality constraints ``c(x) = 0`` through multipliers
and a quadratic penalty; bounds are kept exactly by projection inside the
inner minimizers:

* projected Newton (Bertsekas-style active set) when the objective supplies a
  Hessian diagonal or a dense Hessian, projected BFGS otherwise;
* Nelder-Mead with clipping for small derivative-free problems.

:func:`kkt_residuals` and :func:`second_order_check` certify a returned point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from . import kernels
from .errors import SolverError

_FD_STEP = 6e-6  # ~ eps**(1/3) for central differences


@dataclass
class ObjectiveProblem:
    """Minimize ``objective(x)`` subject to ``c_k(x) = 0`` and ``lower <= x <= upper``.

    ``gradient``, ``constraint_gradients``, ``hessian`` (dense) and
    ``hessian_diag`` (separable objectives) are optional; finite differences
    and quasi-Newton updates fill in what is missing. ``linear_equalities``
    ``(A, b)`` is a shortcut for the constraints ``A @ x - b = 0``.
    """

    dimension: int
    objective: Callable[[np.ndarray], float]
    equality_constraints: Sequence[Callable[[np.ndarray], float]] = ()
    lower: object = -np.inf
    upper: object = np.inf
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraint_gradients: Optional[Sequence[Callable[[np.ndarray], np.ndarray]]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian_diag: Optional[Callable[[np.ndarray], np.ndarray]] = None
    linear_equalities: Optional[tuple] = None

    def __post_init__(self):
        n = int(self.dimension)
        if n < 1:
            raise ValueError("dimension must be positive")
        self.dimension = n
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if self.linear_equalities is not None:
            A, b = self.linear_equalities
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape != (b.shape[0], n):
                raise ValueError("linear equality shapes do not match the dimension")
            self.linear_equalities = (A, b)
            if not self.equality_constraints:
                self.equality_constraints = [
                    (lambda x, r=r: float(A[r] @ x - b[r])) for r in range(A.shape[0])
                ]
                self.constraint_gradients = [(lambda x, r=r: A[r]) for r in range(A.shape[0])]

    @property
    def n_constraints(self) -> int:
        return len(self.equality_constraints)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def in_bounds(self, x) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def constraint_values(self, x) -> np.ndarray:
        if self.linear_equalities is not None:
            A, b = self.linear_equalities
            return A @ x - b
        return np.array([float(c(x)) for c in self.equality_constraints])

    def constraint_jacobian(self, x) -> np.ndarray:
        m = self.n_constraints
        if self.linear_equalities is not None:
            return self.linear_equalities[0]
        if m == 0:
            return np.zeros((0, self.dimension))
        if self.constraint_gradients is not None:
            return np.vstack([np.asarray(g(x), dtype=float) for g in self.constraint_gradients])
        return np.vstack([finite_difference_gradient(c, x) for c in self.equality_constraints])

    def objective_gradient(self, x) -> np.ndarray:
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return finite_difference_gradient(self.objective, x)

    def lagrangian_gradient(self, x, multipliers) -> np.ndarray:
        g = self.objective_gradient(x)
        if self.n_constraints:
            g = g + self.constraint_jacobian(x).T @ np.asarray(multipliers, dtype=float)
        return g


@dataclass
class SolverConfig:
    eq_tol: float = 1e-8
    kkt_tol: float = 1e-5
    ftol: float = 1e-10
    max_outer: int = 50
    max_inner: int = 5000
    initial_penalty: float = 10.0
    penalty_growth: float = 10.0
    required_reduction: float = 4.0
    max_penalty: float = 1e8
    inner: str = "auto"  # "auto" | "newton" | "nelder-mead"
    nelder_mead_max_dimension: int = 4
    inner_gtol: float = 1e-13
    merit_weight: float = 1e4
    trace_path: Optional[str] = None


@dataclass
class SolveDiagnostics:
    iterations: int
    objective_value: float
    max_equality_violation: float
    kkt_stationarity_residual: float
    converged: bool
    method_tag: str
    multipliers: list = field(default_factory=list)
    inner_iterations: int = 0
    penalty: float = 0.0
    message: str = ""
    merit_history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SolveDiagnostics":
        return cls(**data)


def finite_difference_gradient(fun, x, step=_FD_STEP):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (xp[i] - xm[i])
    return g


# --------------------------------------------------------------------------
# inner minimizers


def _projected_newton(fun_grad, hess_model, x, lower, upper, gtol, max_iter):
    """Bound-constrained Newton/BFGS on the free variables with an Armijo arc search.

    ``hess_model(x)`` returns ``("lowrank", hdiag, J, rho)``, a dense matrix,
    or ``None`` to request BFGS updates.
    """
    sigma = 1e-4
    n = x.size
    bfgs = None
    val, g = fun_grad(x)
    it = 0
    stalls = 0
    for it in range(1, max_iter + 1):
        pg = x - np.clip(x - g, lower, upper)
        pg_norm = np.abs(pg).max() if n else 0.0
        if pg_norm <= gtol:
            break
        eps = min(1e-8 * (1.0 + np.abs(x).max()), pg_norm)
        active = ((x <= lower + eps) & (g > 0)) | ((x >= upper - eps) & (g < 0))
        free = ~active
        model = hess_model(x)
        if model is None:
            if bfgs is None:
                bfgs = np.eye(n) * max(1e-8, np.abs(g).max())
            model = bfgs
        if isinstance(model, tuple):
            _, hdiag, jac, rho = model
            scale = hdiag
            try:
                d = kernels.lowrank_newton_direction(hdiag, jac, rho, g, free)
            except np.linalg.LinAlgError:
                d = -g / scale
            if not np.all(np.isfinite(d)):
                d = -g / scale
        else:
            scale = np.maximum(np.abs(np.diag(model)), 1e-12)
            d = -g / scale
            if free.any():
                hff = model[np.ix_(free, free)]
                d[free] = _solve_pd(hff, -g[free])
        if g[free] @ d[free] >= 0:
            d = -g / scale
        x_new, val_new = _arc_search(fun_grad, x, val, g, d, lower, upper, sigma)
        if x_new is None:
            d = -g / scale
            x_new, val_new = _arc_search(fun_grad, x, val, g, d, lower, upper, sigma)
            if x_new is None:
                break
        val_new, g_new = fun_grad(x_new)
        if bfgs is not None:
            s = x_new - x
            yv = g_new - g
            sy = s @ yv
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
                bs = bfgs @ s
                bfgs += np.outer(yv, yv) / sy - np.outer(bs, bs) / (s @ bs)
        if val - val_new <= 1e-15 * abs(val):
            stalls += 1
        else:
            stalls = 0
        x, val, g = x_new, val_new, g_new
        if stalls >= 3:
            break
    return x, it


def _solve_pd(h, rhs):
    shift = 0.0
    scale = max(1e-300, np.abs(np.diag(h)).max())
    for _ in range(30):
        try:
            c = np.linalg.cholesky(h + shift * np.eye(h.shape[0]))
            return np.linalg.solve(c.T, np.linalg.solve(c, rhs))
        except np.linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-10 * scale)
    return rhs / scale


def _arc_search(fun_grad, x, val, g, d, lower, upper, sigma):
    alpha = 1.0
    while alpha > 1e-20:
        xt = np.clip(x + alpha * d, lower, upper)
        vt, _ = fun_grad(xt)
        if np.isfinite(vt) and vt <= val + sigma * (g @ (xt - x)):
            if np.array_equal(xt, x):
                return None, val
            return xt, vt
        alpha *= 0.5
    return None, val


def nelder_mead(fun, x0, lower=None, upper=None, step=None, xatol=1e-12, fatol=1e-24,
                max_iter=5000, max_restarts=8):
    """Nelder-Mead simplex search; trial points are clipped into the box.

    After convergence the simplex is rebuilt around the best vertex and the
    search restarted until a restart no longer improves the value.

    Returns
    -------
    x : ndarray
        Best vertex found.
    fx : float
        Objective value at ``x``.
    nit : int
        Total simplex iterations over all restarts.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    best_x = np.clip(x0, lo, hi)
    best_f = fun(best_x)
    total = 0
    for restart in range(max_restarts + 1):
        if step is None:
            h = np.where(best_x != 0, 0.05 * np.abs(best_x), 2.5e-4)
        else:
            h = np.broadcast_to(np.asarray(step, dtype=float), (n,)) / (10.0**restart)
        x, fx, nit = _nelder_mead_run(fun, best_x, h, lo, hi, xatol, fatol, max_iter - total)
        total += nit
        improved = fx < best_f - fatol - 1e-15 * abs(best_f)
        if fx <= best_f:
            best_x, best_f = x, fx
        if (restart > 0 and not improved) or total >= max_iter:
            break
    return best_x, best_f, total


def _nelder_mead_run(fun, x0, h, lo, hi, xatol, fatol, max_iter):
    n = x0.size
    sim = np.empty((n + 1, n))
    sim[0] = x0
    for i in range(n):
        v = x0.copy()
        v[i] += h[i]
        if v[i] > hi[i]:
            v[i] = x0[i] - h[i]
        sim[i + 1] = np.clip(v, lo, hi)
    fs = np.array([fun(v) for v in sim])
    it = 0
    while it < max_iter:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        xscale = max(1.0, np.abs(sim[0]).max())
        if (np.abs(sim[1:] - sim[0]).max() <= xatol * xscale
                and np.abs(fs[1:] - fs[0]).max() <= fatol + 1e-15 * abs(fs[0])):
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = np.clip(centroid + (centroid - sim[-1]), lo, hi)
        fr = fun(xr)
        if fr < fs[0]:
            xe = np.clip(centroid + 2.0 * (centroid - sim[-1]), lo, hi)
            fe = fun(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
            fc = fun(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = np.clip(centroid + 0.5 * (sim[-1] - centroid), lo, hi)
            fc = fun(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
        fs[1:] = [fun(v) for v in sim[1:]]
    k = int(np.argmin(fs))
    return sim[k].copy(), float(fs[k]), it


# --------------------------------------------------------------------------
# outer loop


def _choose_inner(problem, cfg):
    if cfg.inner == "auto":
        small = problem.dimension <= cfg.nelder_mead_max_dimension
        return "nelder-mead" if small else "newton"
    if cfg.inner not in ("newton", "nelder-mead"):
        raise ValueError(f"unknown inner method {cfg.inner!r}")
    return cfg.inner


def _finite(value, x, what):
    if not np.all(np.isfinite(value)):
        raise SolverError(f"non-finite {what} encountered", point=np.array(x, copy=True))


def minimize_auglag(problem: ObjectiveProblem, initial, config: SolverConfig = None,
                    multipliers=None):
    """Minimize ``problem`` from ``initial``.

    Returns the final point and a :class:`SolveDiagnostics`. When the outer
    iteration limit is reached the last iterate is returned with
    ``converged=False``.
    """
    cfg = config or SolverConfig()
    x = np.array(initial, dtype=float).reshape(-1)
    if x.size != problem.dimension:
        raise ValueError(f"initial point has size {x.size}, expected {problem.dimension}")
    if not problem.in_bounds(x):
        raise ValueError("initial point violates the bound constraints")
    lo, hi = problem.lower, problem.upper
    m = problem.n_constraints
    y = np.zeros(m) if multipliers is None else np.array(multipliers, dtype=float)
    rho = cfg.initial_penalty
    inner = _choose_inner(problem, cfg)
    if inner == "nelder-mead":
        tag = "auglag/nelder-mead"
    elif problem.hessian_diag is not None or problem.hessian is not None:
        tag = "auglag/projected-newton"
    else:
        tag = "auglag/projected-bfgs"

    fx = float(problem.objective(x))
    _finite(fx, x, "objective")
    c = problem.constraint_values(x)
    _finite(c, x, "constraint")
    viol = float(np.abs(c).max()) if m else 0.0
    merit_prev = math.inf  # the starting point is not an outer iterate

    trace_rows = []
    total_inner = 0
    converged = False
    stationarity = math.inf
    message = "outer iteration limit reached"
    outer = 0

    for outer in range(1, cfg.max_outer + 1):
        x_new, nit = _inner_solve(problem, inner, x, y, rho, cfg)
        total_inner += nit
        f_new = float(problem.objective(x_new))
        _finite(f_new, x_new, "objective")
        c_new = problem.constraint_values(x_new)
        _finite(c_new, x_new, "constraint")
        viol_new = float(np.abs(c_new).max()) if m else 0.0
        merit = f_new + cfg.merit_weight * float(np.abs(c_new).sum())
        accepted = merit <= merit_prev + 1e-12 * max(1.0, abs(merit_prev))

        if accepted:
            rel_change = abs(f_new - fx) / max(1.0, abs(fx))
            x, fx, c, merit_prev = x_new, f_new, c_new, merit
            y = y + rho * c
            stationarity = _stationarity(problem, x, y)
            if viol_new <= cfg.eq_tol and stationarity <= cfg.kkt_tol:
                viol = viol_new
                converged = True
                message = "converged"
            else:
                if viol_new > viol / cfg.required_reduction:
                    rho = min(rho * cfg.penalty_growth, cfg.max_penalty)
                stalled = rel_change <= cfg.ftol and viol_new >= viol and rho >= cfg.max_penalty
                viol = viol_new
                if stalled:
                    message = "stalled: no progress at the penalty cap"
        else:
            rho = min(rho * cfg.penalty_growth, cfg.max_penalty)
            stalled = False

        trace_rows.append((outer, merit, f_new, viol_new, stationarity, rho, int(accepted)))
        if converged or (accepted and stalled):
            break

    if cfg.trace_path:
        _append_trace(cfg.trace_path, tag, trace_rows)

    diag = SolveDiagnostics(
        iterations=outer,
        objective_value=fx,
        max_equality_violation=viol,
        kkt_stationarity_residual=float(stationarity),
        converged=converged,
        method_tag=tag,
        multipliers=[float(v) for v in y],
        inner_iterations=total_inner,
        penalty=rho,
        message=message,
        merit_history=[[float(r[1]), bool(r[6])] for r in trace_rows],
    )
    return x, diag


def _inner_solve(problem, inner, x, y, rho, cfg):
    lo, hi = problem.lower, problem.upper

    def merit_value(z):
        fz = float(problem.objective(z))
        if not problem.n_constraints:
            return fz
        cz = problem.constraint_values(z)
        return fz + y @ cz + 0.5 * rho * (cz @ cz)

    if inner == "nelder-mead":
        x_new, _, nit = nelder_mead(merit_value, x, lo, hi, max_iter=cfg.max_inner)
        return x_new, nit

    def fun_grad(z):
        fz = float(problem.objective(z))
        gz = problem.objective_gradient(z)
        if problem.n_constraints:
            cz = problem.constraint_values(z)
            jz = problem.constraint_jacobian(z)
            fz += y @ cz + 0.5 * rho * (cz @ cz)
            gz = gz + jz.T @ (y + rho * cz)
        return fz, gz

    def hess_model(z):
        jz = problem.constraint_jacobian(z)
        if problem.hessian_diag is not None:
            h = np.asarray(problem.hessian_diag(z), dtype=float)
            h = np.maximum(h, max(1e-300, 1e-12 * h.max()))
            if not problem.n_constraints:
                return ("lowrank", h, np.zeros((1, z.size)), 1.0)
            return ("lowrank", h, np.ascontiguousarray(jz), rho)
        if problem.hessian is not None:
            return np.asarray(problem.hessian(z), dtype=float) + rho * (jz.T @ jz)
        return None

    return _projected_newton(fun_grad, hess_model, x, lo, hi, cfg.inner_gtol, cfg.max_inner)


def _stationarity(problem, x, y):
    gl = problem.lagrangian_gradient(x, y)
    pg = x - problem.project(x - gl)
    return float(np.abs(pg).max())


def _append_trace(path, tag, rows):
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if fh.tell() == 0:
            writer.writerow(["method", "outer", "merit", "objective", "max_violation",
                             "stationarity", "penalty", "accepted"])
        for r in rows:
            writer.writerow([tag, r[0], f"{r[1]:.17g}", f"{r[2]:.17g}", f"{r[3]:.17g}",
                             f"{r[4]:.17g}", f"{r[5]:.17g}", r[6]])


# --------------------------------------------------------------------------
# certification


def kkt_residuals(problem: ObjectiveProblem, point, multipliers):
    """First-order KKT residuals at ``point``.

    Returns ``(stationarity, feasibility, complementarity)``: the max-norm of
    the projected Lagrangian gradient, the max equality violation, and the
    max of ``bound multiplier * slack`` with bound multipliers estimated from
    the sign of the Lagrangian gradient.
    """
    x = np.asarray(point, dtype=float)
    y = np.asarray(multipliers, dtype=float)
    gl = problem.lagrangian_gradient(x, y)
    stationarity = float(np.abs(x - problem.project(x - gl)).max())
    c = problem.constraint_values(x)
    feasibility = float(np.abs(c).max()) if c.size else 0.0
    comp = 0.0
    lo_fin = np.isfinite(problem.lower)
    if lo_fin.any():
        z = np.maximum(gl[lo_fin], 0.0)
        comp = max(comp, float(np.abs(z * (x[lo_fin] - problem.lower[lo_fin])).max()))
    hi_fin = np.isfinite(problem.upper)
    if hi_fin.any():
        z = np.maximum(-gl[hi_fin], 0.0)
        comp = max(comp, float(np.abs(z * (problem.upper[hi_fin] - x[hi_fin])).max()))
    return stationarity, feasibility, comp


def second_order_check(problem: ObjectiveProblem, point, multipliers, active_tol=1e-10):
    """Smallest eigenvalue of the reduced Lagrangian Hessian.

    The Hessian is built from central differences of the Lagrangian gradient
    on the free (inactive) variables and reduced to the null space of the
    constraint Jacobian. Returns ``inf`` when that null space is trivial.
    """
    x = np.asarray(point, dtype=float)
    y = np.asarray(multipliers, dtype=float)
    free = (x > problem.lower + active_tol) & (x < problem.upper - active_tol)
    idx = np.flatnonzero(free)
    if idx.size == 0:
        return math.inf
    H = np.empty((idx.size, idx.size))
    for col, j in enumerate(idx):
        h = _FD_STEP * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        H[:, col] = (problem.lagrangian_gradient(xp, y)[idx]
                     - problem.lagrangian_gradient(xm, y)[idx]) / (2 * h)
    H = 0.5 * (H + H.T)
    if problem.n_constraints:
        Z = null_space(problem.constraint_jacobian(x)[:, idx])
        if Z.shape[1] == 0:
            return math.inf
        H = Z.T @ H @ Z
    return float(np.linalg.eigvalsh(H).min())
