"""Shortest-path distributions: densities whose CDF has minimal arc length
subject to raw-moment constraints, with maximum-entropy references for
comparison."""

from .density import (
    Interval,
    MomentSpec,
    Partition,
    PiecewiseDensity,
    cdf,
    make_partition,
    moment_matrix,
    moment_weights,
    path_length,
    raw_moment,
    uniformity_index,
    uniformity_lower_bound,
)
from .direct import SolveReport, SpdProblem, refine_solve, solve_spd
from .errors import (
    ConstructionError,
    DomainError,
    InfeasibleError,
    NegativityError,
    SingularityError,
    SolverError,
    SpdError,
    UnsupportedOperationError,
)
from .euler_lagrange import (
    MultiplierVector,
    ParametricDensity,
    eval_parametric,
    fit_multipliers,
    induced_density,
)
from .experiments import (
    PRESETS,
    CaseSpec,
    ComparisonRow,
    difference_ratio,
    emit_report,
    run_bound_sweep,
    run_case,
)
from .kernels import BACKEND
from .optimizer import (
    ObjectiveProblem,
    SolveDiagnostics,
    SolverConfig,
    kkt_residuals,
    minimize_auglag,
    nelder_mead,
    second_order_check,
)
from .reference import (
    ReferenceDistribution,
    match_exponential,
    match_normal,
    match_scaled_beta,
    match_truncated_exponential,
    reference_cell_averages,
    reference_density_on,
    reference_path_length,
    uniform_reference,
)
from .trials import project_feasible, sample_feasible_densities

__version__ = "0.1.0"
