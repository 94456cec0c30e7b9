"""Shortest-path densities from the cell values directly.

The decision vector is the density value on each cell. The objective is the
discretized CDF arc length, the moment constraints are linear in the cell
values, and nonnegativity is a bound constraint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .density import (
    MomentSpec,
    Partition,
    PiecewiseDensity,
    moment_matrix,
    path_length,
    uniformity_index,
)
from .errors import ConstructionError
from .optimizer import (
    ObjectiveProblem,
    SolveDiagnostics,
    SolverConfig,
    kkt_residuals,
    minimize_auglag,
)


@dataclass(frozen=True)
class SpdProblem:
    partition: Partition
    spec: MomentSpec

    def __post_init__(self):
        self.spec.check_attainable(self.partition.interval)
        if self.partition.n < self.spec.order + 2:
            raise ConstructionError(
                f"need at least {self.spec.order + 2} cells for {self.spec.order} moments"
            )

    def constraint_scales(self) -> np.ndarray:
        w = moment_matrix(self.partition, self.spec.order)
        return np.minimum(np.linalg.norm(w, axis=1), 1.0)

    def to_objective_problem(self) -> ObjectiveProblem:
        """Arc-length objective with row-normalized moment constraints."""
        width = self.partition.cell_width
        w = moment_matrix(self.partition, self.spec.order)
        s = self.constraint_scales()
        A = w / s[:, None]
        b = self.spec.as_array() / s

        def objective(f):
            return kernels.arc_length_terms(f, width)[0]

        def gradient(f):
            return kernels.arc_length_terms(f, width)[1]

        def hessian_diag(f):
            return kernels.arc_length_terms(f, width)[2]

        return ObjectiveProblem(
            dimension=self.partition.n,
            objective=objective,
            gradient=gradient,
            hessian_diag=hessian_diag,
            lower=0.0,
            upper=np.inf,
            linear_equalities=(A, b),
        )


@dataclass
class SolveReport:
    density: PiecewiseDensity
    achieved_moments: list
    path_length: float
    uniformity_index: float
    diagnostics: SolveDiagnostics
    kkt: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged

    def to_dict(self) -> dict:
        return {
            "density": self.density.to_dict(),
            "achieved_moments": list(self.achieved_moments),
            "path_length": self.path_length,
            "uniformity_index": self.uniformity_index,
            "diagnostics": self.diagnostics.to_dict(),
            "kkt": dict(self.kkt),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        return cls(
            density=PiecewiseDensity.from_dict(data["density"]),
            achieved_moments=list(data["achieved_moments"]),
            path_length=data["path_length"],
            uniformity_index=data["uniformity_index"],
            diagnostics=SolveDiagnostics.from_dict(data["diagnostics"]),
            kkt=dict(data.get("kkt", {})),
        )


def warm_start(problem: SpdProblem) -> np.ndarray:
    """Uniform start, tilted linearly to match the mean when that stays nonnegative."""
    part = problem.partition
    f = np.full(part.n, 1.0 / part.interval.length)
    if problem.spec.order >= 1:
        w = moment_matrix(part, 1)
        t = part.midpoints - 0.5 * (part.interval.a + part.interval.b)
        basis = np.column_stack([np.ones(part.n), t])
        coef = np.linalg.solve(w @ basis, np.array(problem.spec.targets[:2]))
        tilted = basis @ coef
        if tilted.min() >= 0:
            f = tilted
    return f


def solve_spd(problem: SpdProblem, config: SolverConfig = None, initial=None) -> SolveReport:
    cfg = config or SolverConfig(inner="newton")
    if cfg.inner == "auto":
        cfg = SolverConfig(**{**cfg.__dict__, "inner": "newton"})
    obj = problem.to_objective_problem()
    x0 = warm_start(problem) if initial is None else np.maximum(np.asarray(initial, float), 0.0)
    x, diag = minimize_auglag(obj, x0, cfg)
    x = np.maximum(x, 0.0)
    density = PiecewiseDensity(problem.partition, x)
    w = moment_matrix(problem.partition, problem.spec.order)
    achieved = w @ x
    raw_err = float(np.abs(achieved - problem.spec.as_array()).max())
    stat, feas, comp = kkt_residuals(obj, x, diag.multipliers)
    if diag.converged and raw_err > cfg.eq_tol:
        diag.converged = False
        diag.message = f"raw moment error {raw_err:.3g} exceeds eq_tol"
    return SolveReport(
        density=density,
        achieved_moments=[float(v) for v in achieved],
        path_length=path_length(density),
        uniformity_index=uniformity_index(density),
        diagnostics=diag,
        kkt={"stationarity": stat, "feasibility": feas, "complementarity": comp,
             "raw_moment_error": raw_err},
    )


def prolong(density: PiecewiseDensity, partition: Partition) -> np.ndarray:
    """Piecewise-constant transfer of cell values onto a finer (or any) grid."""
    src = density.partition
    return density.values[src.cell_of(partition.midpoints)]


def refine_solve(problem: SpdProblem, n_schedule, config: SolverConfig = None):
    schedule = [int(n) for n in n_schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("n_schedule must be strictly increasing")
    reports = []
    previous = None
    for n in schedule:
        stage = SpdProblem(Partition(problem.partition.interval, n), problem.spec)
        start = None if previous is None else prolong(previous.density, stage.partition)
        previous = solve_spd(stage, config, initial=start)
        reports.append(previous)
    return reports
