"""Parametric route: densities ``f = P / sqrt(1 - P**2)`` with polynomial ``P``.

Stationarity of the arc-length Lagrangian gives this family, with
``P(x) = sum_i lambda_i x**i``. Multipliers are fitted by least squares on
the discretized moment residuals, restricted to the polytope
``0 <= P(p_j) <= 1 - EPS_FEAS`` at every cell midpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import kernels
from .density import Interval, MomentSpec, Partition, PiecewiseDensity, moment_matrix
from .errors import ConstructionError, DomainError, NegativityError, SingularityError
from .optimizer import ObjectiveProblem, SolveDiagnostics, SolverConfig, minimize_auglag

EPS_FEAS = 1e-6
FIT_TOL = 1e-6


@dataclass(frozen=True)
class MultiplierVector:
    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        if not lam:
            raise ConstructionError("need at least lambda_0")
        if not all(math.isfinite(v) for v in lam):
            raise ConstructionError("multipliers must be finite")
        object.__setattr__(self, "lambdas", lam)

    @property
    def order(self) -> int:
        return len(self.lambdas) - 1

    def polynomial(self, x):
        return npoly.polyval(np.asarray(x, dtype=float), self.lambdas)

    def to_dict(self) -> dict:
        return {"m": self.order, "lambdas": list(self.lambdas)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MultiplierVector":
        mv = cls(tuple(data["lambdas"]))
        if "m" in data and int(data["m"]) != mv.order:
            raise ConstructionError("multiplier count does not match m")
        return mv

    @classmethod
    def from_json(cls, text: str) -> "MultiplierVector":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ParametricDensity:
    multipliers: MultiplierVector
    interval: Interval


def density_from_polynomial(p):
    """The map ``P -> P / sqrt(1 - P**2)`` on ``[0, 1)``."""
    p = np.asarray(p, dtype=float)
    return p / np.sqrt((1.0 - p) * (1.0 + p))


def polynomial_from_density(v):
    """Inverse map ``v -> v / sqrt(1 + v**2)``."""
    v = np.asarray(v, dtype=float)
    return v / np.hypot(1.0, v)


def _check_polynomial(xs, ps):
    bad = np.flatnonzero(ps >= 1.0)
    if bad.size:
        i = bad[0]
        raise SingularityError(float(xs[i]), float(ps[i]))
    bad = np.flatnonzero(ps < 0.0)
    if bad.size:
        i = bad[0]
        raise NegativityError(float(xs[i]), float(ps[i]))


def eval_parametric(density: ParametricDensity, x):
    xs = np.asarray(x, dtype=float)
    iv = density.interval
    if np.any(xs < iv.a) or np.any(xs > iv.b):
        raise DomainError(f"x outside [{iv.a}, {iv.b}]")
    flat = np.atleast_1d(xs)
    ps = density.multipliers.polynomial(flat)
    _check_polynomial(flat, ps)
    out = density_from_polynomial(ps)
    return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)


def feasibility_margin(multipliers: MultiplierVector, partition: Partition,
                       eps: float = EPS_FEAS) -> float:
    p = multipliers.polynomial(partition.midpoints)
    return float(np.minimum(p, 1.0 - eps - p).min())


def induced_density(multipliers: MultiplierVector, partition: Partition) -> PiecewiseDensity:
    mids = partition.midpoints
    p = multipliers.polynomial(mids)
    _check_polynomial(mids, p)
    return PiecewiseDensity(partition, density_from_polynomial(p))


def default_initial_multipliers(spec: MomentSpec, interval: Interval) -> MultiplierVector:
    """Constant polynomial whose density is the uniform ``1 / (b - a)``."""
    lam0 = float(polynomial_from_density(1.0 / interval.length))
    return MultiplierVector((lam0,) + (0.0,) * spec.order)


def _to_scaled(lambdas, center, half):
    # coefficients of t -> P(center + half * t)
    out = np.zeros(len(lambdas))
    basis = np.array([1.0])
    for lam in lambdas:
        out[: basis.size] += lam * basis
        basis = npoly.polymul(basis, [center, half])
    return out


def _from_scaled(betas, center, half):
    out = np.zeros(len(betas))
    basis = np.array([1.0])
    for beta in betas:
        out[: basis.size] += beta * basis
        basis = npoly.polymul(basis, [-center / half, 1.0 / half])
    return out


def fit_multipliers(spec: MomentSpec, partition: Partition, initial: MultiplierVector = None,
                    config: SolverConfig = None, eps: float = EPS_FEAS):
    """Least-squares fit of the multipliers to the moment targets.

    The polynomial is optimized in the basis of ``t = (x - c) / h`` (centre and
    half-width of the interval) for conditioning, with Nelder-Mead inside the
    augmented-Lagrangian loop; the polytope enters as one aggregated hinge
    equality constraint. Moment residuals are weighted by the norm of their
    weight rows.

    Returns the multipliers and diagnostics whose ``objective_value`` is the
    unweighted sum of squared moment residuals. ``converged`` means the root
    of that sum is at most ``FIT_TOL`` and the result lies in the polytope.
    """
    iv = partition.interval
    if initial is None:
        initial = default_initial_multipliers(spec, iv)
    if initial.order != spec.order:
        raise ConstructionError("initial multipliers and moment spec differ in order")
    if feasibility_margin(initial, partition, eps) <= 0:
        raise ConstructionError("initial multipliers lie outside the feasible polytope")

    center = 0.5 * (iv.a + iv.b)
    half = 0.5 * iv.length
    t = (partition.midpoints - center) / half
    w = moment_matrix(partition, spec.order)
    scale = np.minimum(np.linalg.norm(w, axis=1), 1.0)
    mu = spec.as_array()
    hi = 1.0 - eps

    def densities(beta):
        p, f = kernels.parametric_values(np.ascontiguousarray(beta), t)
        bad = (p < 0.0) | (p > hi)
        if bad.any():
            pc = np.clip(p, 0.0, hi)
            f = density_from_polynomial(pc)
        return p, f

    def objective(beta):
        _, f = densities(beta)
        r = (w @ f - mu) / scale
        return float(r @ r)

    powers = np.vander(t, spec.order + 1, increasing=True)

    def gradient(beta):
        p, f = densities(beta)
        r = (w @ f - mu) / scale
        inside = (p >= 0.0) & (p <= hi)
        dfdp = np.where(inside, 1.0 / ((1.0 - p) * (1.0 + p)) ** 1.5, 0.0)
        jac = (w * dfdp) @ powers / scale[:, None]
        return 2.0 * jac.T @ r

    def hinge(beta):
        p, _ = densities(beta)
        return float(np.maximum(-p, 0.0).sum() + np.maximum(p - hi, 0.0).sum())

    problem = ObjectiveProblem(
        dimension=spec.order + 1,
        objective=objective,
        gradient=gradient,
        equality_constraints=[hinge],
    )
    cfg = config or SolverConfig()
    cfg = SolverConfig(**{**cfg.__dict__, "inner": "nelder-mead", "kkt_tol": 1e-6})
    beta0 = _to_scaled(initial.lambdas, center, half)
    beta, diag = minimize_auglag(problem, beta0, cfg)

    lambdas = MultiplierVector(tuple(_from_scaled(beta, center, half)))
    _, f = densities(beta)
    resid = w @ f - mu
    sq = float(resid @ resid)
    margin = feasibility_margin(lambdas, partition, eps)
    ok = math.sqrt(sq) <= FIT_TOL and margin >= 0
    if ok:
        message = "converged"
    elif margin < 0:
        message = f"left the feasible polytope (margin {margin:.3g})"
    else:
        message = f"moment residual {math.sqrt(sq):.3g} above {FIT_TOL:g}"
    report = SolveDiagnostics(
        iterations=diag.iterations,
        objective_value=sq,
        max_equality_violation=float(np.abs(resid).max()),
        kkt_stationarity_residual=diag.kkt_stationarity_residual,
        converged=ok,
        method_tag="lambda-lsq/" + diag.method_tag,
        multipliers=list(diag.multipliers),
        inner_iterations=diag.inner_iterations,
        penalty=diag.penalty,
        message=message,
        merit_history=diag.merit_history,
    )
    return lambdas, report
