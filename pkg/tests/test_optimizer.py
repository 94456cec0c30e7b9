import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spd import (
    ObjectiveProblem,
    SolveDiagnostics,
    SolverConfig,
    SolverError,
    kkt_residuals,
    minimize_auglag,
    nelder_mead,
    second_order_check,
)
from spd.direct import SpdProblem
from spd.density import Interval, MomentSpec, Partition
from spd.optimizer import finite_difference_gradient


def sphere_on_line():
    return ObjectiveProblem(
        dimension=2,
        objective=lambda x: float(x @ x),
        gradient=lambda x: 2 * x,
        equality_constraints=[lambda x: float(x[0] + x[1] - 1.0)],
        constraint_gradients=[lambda x: np.array([1.0, 1.0])],
    )


@pytest.mark.parametrize("inner", ["newton", "nelder-mead"])
def test_sphere_on_line(inner):
    x, diag = minimize_auglag(sphere_on_line(), [0.0, 0.0], SolverConfig(inner=inner))
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-6)
    assert diag.converged
    assert diag.max_equality_violation <= 1e-8
    assert diag.kkt_stationarity_residual <= 1e-5
    assert diag.method_tag.startswith("auglag/")


def test_sphere_without_gradient_uses_bfgs():
    p = ObjectiveProblem(dimension=2, objective=lambda x: float(x @ x),
                         equality_constraints=[lambda x: float(x[0] + x[1] - 1.0)])
    x, diag = minimize_auglag(p, [0.0, 0.0], SolverConfig(inner="newton"))
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-5)
    assert diag.method_tag == "auglag/projected-bfgs"


def test_arc_length_goes_to_zero_under_bounds():
    n = 6
    p = ObjectiveProblem(
        dimension=n,
        objective=lambda x: float(np.hypot(1, x).sum()),
        gradient=lambda x: x / np.hypot(1, x),
        hessian_diag=lambda x: 1 / np.hypot(1, x) ** 3,
        lower=0.0,
    )
    x, diag = minimize_auglag(p, np.linspace(0, 5, n), SolverConfig(inner="newton"))
    assert np.all(x >= 0)
    np.testing.assert_allclose(x, 0, atol=1e-8)
    assert diag.converged


def test_bounds_hold_exactly_on_return():
    p = ObjectiveProblem(
        dimension=3,
        objective=lambda x: float(((x - np.array([-1, 2, 0.5])) ** 2).sum()),
        lower=0.0,
        upper=1.0,
    )
    x, _ = minimize_auglag(p, [0.5, 0.5, 0.5])
    assert np.all((x >= 0) & (x <= 1))
    np.testing.assert_allclose(x, [0, 1, 0.5], atol=1e-6)


def test_start_outside_bounds_rejected():
    p = ObjectiveProblem(dimension=1, objective=lambda x: float(x[0] ** 2), lower=0.0)
    with pytest.raises(ValueError):
        minimize_auglag(p, [-1.0])


def test_non_finite_objective_raises_with_point():
    p = ObjectiveProblem(dimension=1, objective=lambda x: math.log(x[0] - 1.0) if x[0] > 1
                         else float("nan"))
    with pytest.raises(SolverError) as err:
        minimize_auglag(p, [0.0])
    assert err.value.point is not None


def test_iteration_limit_reports_not_converged():
    cfg = SolverConfig(max_outer=1, inner="nelder-mead", max_inner=3)
    x, diag = minimize_auglag(sphere_on_line(), [0.0, 0.0], cfg)
    assert not diag.converged
    assert diag.iterations == 1
    assert x.shape == (2,)


def spd_problem(n=200):
    return SpdProblem(Partition(Interval(0, 0.1), n), MomentSpec((1.0, 0.04)))


def test_spd_instance_path_length():
    prob = spd_problem()
    obj = prob.to_objective_problem()
    from spd.direct import warm_start
    x, diag = minimize_auglag(obj, warm_start(prob), SolverConfig(inner="newton"))
    assert diag.converged
    assert diag.objective_value == pytest.approx(1.006, abs=0.005)


def test_merit_nonincreasing_over_accepted_iterations():
    for problem, x0, inner in [
        (sphere_on_line(), [0.0, 0.0], "nelder-mead"),
        (spd_problem(100).to_objective_problem(), np.full(100, 10.0), "newton"),
    ]:
        _, diag = minimize_auglag(problem, x0, SolverConfig(inner=inner))
        accepted = [m for m, ok in diag.merit_history if ok]
        assert accepted
        assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(accepted, accepted[1:]))


def test_deterministic():
    prob = spd_problem(150).to_objective_problem()
    x0 = np.full(150, 10.0)
    a = minimize_auglag(prob, x0, SolverConfig(inner="newton"))
    b = minimize_auglag(prob, x0, SolverConfig(inner="newton"))
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1].to_dict() == b[1].to_dict()


def test_trace_appends_rows(tmp_path):
    path = tmp_path / "trace.csv"
    cfg = SolverConfig(inner="nelder-mead", trace_path=str(path))
    minimize_auglag(sphere_on_line(), [0.0, 0.0], cfg)
    minimize_auglag(sphere_on_line(), [0.0, 0.0], cfg)
    rows = path.read_text().splitlines()
    assert rows[0].startswith("method,outer,merit")
    assert sum(r.startswith("method") for r in rows) == 1
    assert len(rows) >= 3


def test_diagnostics_json_round_trip():
    _, diag = minimize_auglag(sphere_on_line(), [0.0, 0.0])
    assert SolveDiagnostics.from_dict(diag.to_dict()) == diag
    import json
    assert SolveDiagnostics.from_dict(json.loads(diag.to_json())) == diag


# --- KKT certification


def quadratic():
    c = np.array([1.0, -2.0, 0.5])
    return ObjectiveProblem(dimension=3, objective=lambda x: float(((x - c) ** 2).sum()),
                            gradient=lambda x: 2 * (x - c)), c


def test_kkt_zero_at_vertex():
    p, c = quadratic()
    s, f, comp = kkt_residuals(p, c, [])
    assert max(s, f, comp) <= 1e-6


def test_kkt_detects_perturbation():
    # bumping one coordinate of a strongly convex problem by 0.1 must show up
    p, c = quadratic()
    x = c.copy()
    x[1] += 0.1
    assert kkt_residuals(p, x, [])[0] > 1e-3


def test_kkt_at_converged_spd():
    prob = spd_problem()
    from spd import solve_spd
    rep = solve_spd(prob)
    obj = prob.to_objective_problem()
    s, f, comp = kkt_residuals(obj, rep.density.values, rep.diagnostics.multipliers)
    assert max(s, f, comp) <= 1e-5
    assert second_order_check(obj, rep.density.values, rep.diagnostics.multipliers) >= -1e-4


def test_second_order_detects_saddle():
    p = ObjectiveProblem(dimension=2, objective=lambda x: float(x[0] ** 2 - x[1] ** 2))
    assert second_order_check(p, np.zeros(2), []) < -1


@given(st.integers(0, 2**32 - 1))
def test_arc_length_gradient_matches_finite_differences(seed):
    prob = spd_problem(40).to_objective_problem()
    x = np.random.default_rng(seed).exponential(10.0, 40) + 0.1
    g = prob.objective_gradient(x)
    fd = finite_difference_gradient(prob.objective, x)
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-12)


# --- oracle: grid search on small problems


def _grid_oracle(objective, weights, step=1e-3):
    # the feasible set {x >= 0, W x = mu} in dimension 3 is a segment; grid its
    # first coordinate and solve the two constraints for the other two
    W, mu = weights
    x0 = np.arange(0.0, mu[0] / W[0, 0] + step, step)
    rhs = mu[:, None] - np.outer(W[:, 0], x0)
    rest = np.linalg.solve(W[:, 1:], rhs)
    pts = np.vstack([x0, rest]).T
    pts = pts[(pts >= 0).all(axis=1)]
    return min(objective(p) for p in pts)


@pytest.mark.parametrize("target", [0.3, 0.45, 0.6])
def test_grid_search_oracle(target):
    part = Partition(Interval(0, 1), 3)
    prob = SpdProblem(part, MomentSpec((1.0, target))).to_objective_problem()
    from spd.direct import warm_start
    x, diag = minimize_auglag(prob, np.full(3, 1.0), SolverConfig(inner="newton"))
    assert diag.converged
    from spd.density import moment_matrix
    w = moment_matrix(part, 1)
    oracle = _grid_oracle(prob.objective, (w, np.array([1.0, target])))
    assert diag.objective_value <= oracle + 2e-3
    assert diag.objective_value == pytest.approx(oracle, abs=2e-3)


# --- Nelder-Mead


def test_nelder_mead_rosenbrock():
    def rosen(x):
        return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)
    x, fx, nit = nelder_mead(rosen, np.array([-1.2, 1.0]))
    np.testing.assert_allclose(x, [1, 1], atol=1e-6)
    assert fx < 1e-12


def test_nelder_mead_respects_bounds():
    x, fx, _ = nelder_mead(lambda x: float(((x + 1) ** 2).sum()), np.array([0.5, 0.5]),
                           lower=np.zeros(2), upper=np.ones(2))
    assert np.all(x >= 0)
    np.testing.assert_allclose(x, 0, atol=1e-8)
