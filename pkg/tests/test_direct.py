import json
import math

import numpy as np
import pytest

from spd import (
    PRESETS,
    ConstructionError,
    InfeasibleError,
    Interval,
    MomentSpec,
    Partition,
    SolveReport,
    SpdProblem,
    fit_multipliers,
    induced_density,
    path_length,
    refine_solve,
    solve_spd,
)
from spd.direct import prolong
from spd.density import cdf, raw_moment


def test_problem_validation():
    with pytest.raises(ConstructionError):
        SpdProblem(Partition(Interval(0, 1), 2), MomentSpec((1.0, 0.3, 0.2)))
    with pytest.raises(InfeasibleError):
        SpdProblem(Partition(Interval(0, 1), 20), MomentSpec((1.0, 1.3)))


def test_m0_uniform():
    rep = solve_spd(SpdProblem(Partition(Interval(0, 1), 100), MomentSpec((1.0,))))
    assert rep.converged
    np.testing.assert_allclose(rep.density.values, 1.0, atol=1e-9)
    assert rep.path_length == pytest.approx(math.sqrt(2), abs=1e-9)
    assert rep.uniformity_index == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name, expected", [("texp", 1.006), ("bell", 1.04), ("bowl", 1.02)])
def test_preset_path_lengths(solved, name, expected):
    rep = solved(name)
    assert rep.converged
    assert rep.path_length == pytest.approx(expected, abs=0.005)


@pytest.mark.parametrize("name", ["uniform", "texp", "bell", "bowl"])
def test_report_invariants(solved, name):
    rep = solved(name)
    spec = PRESETS[name].moment_spec
    d = rep.density
    assert np.all(d.values >= 0)
    for k, mu in enumerate(spec.targets):
        assert abs(raw_moment(d, k) - mu) <= 1e-8
        assert abs(rep.achieved_moments[k] - mu) <= 1e-8
    assert rep.path_length == path_length(d)
    assert rep.path_length >= d.interval.baseline_length - 1e-9
    assert cdf(d, d.interval.b) == pytest.approx(1.0, abs=1e-8)
    assert max(rep.kkt["stationarity"], rep.kkt["feasibility"],
               rep.kkt["complementarity"]) <= 1e-5


def test_texp_density_decreasing(solved):
    v = solved("texp").density.values
    assert v[0] > v[-1]
    assert np.all(np.diff(v) <= 1e-9)


@pytest.mark.parametrize("name", ["bell", "bowl"])
def test_symmetric_specs_give_symmetric_densities(solved, name):
    v = solved(name).density.values
    assert np.abs(v - v[::-1]).max() <= 1e-4


def test_report_json_round_trip(solved):
    rep = solved("bell", 100)
    back = SolveReport.from_dict(json.loads(rep.to_json()))
    assert back.density == rep.density
    assert back.diagnostics == rep.diagnostics
    assert back.kkt == rep.kkt


def test_refine_m1_cauchy():
    case = PRESETS["texp"]
    reps = refine_solve(SpdProblem(Partition(case.interval, 50), case.moment_spec),
                        [50, 100, 200, 400])
    assert all(r.converged for r in reps)
    L = [r.path_length for r in reps]
    gaps = np.abs(np.diff(L))
    assert np.all(np.diff(L) >= -1e-3)
    assert np.all(gaps[1:] < gaps[:-1])


def test_refine_m0_stays_uniform():
    reps = refine_solve(SpdProblem(Partition(Interval(0, 2), 10), MomentSpec((1.0,))),
                        [10, 30, 90])
    for r in reps:
        np.testing.assert_allclose(r.density.values, 0.5, atol=1e-9)


def test_refine_bell_sup_norm_decreases():
    case = PRESETS["bell"]
    reps = refine_solve(SpdProblem(Partition(case.interval, 100), case.moment_spec),
                        [100, 200, 400])
    fine = Partition(case.interval, 400)
    prolonged = [prolong(r.density, fine) for r in reps]
    d1 = np.abs(prolonged[1] - prolonged[0]).max()
    d2 = np.abs(prolonged[2] - prolonged[1]).max()
    assert d2 < d1


def test_refine_schedule_must_increase():
    prob = SpdProblem(Partition(Interval(0, 1), 10), MomentSpec((1.0,)))
    with pytest.raises(ValueError):
        refine_solve(prob, [20, 10])


def test_near_degenerate_spec_reports_status():
    # variance almost at its two-point maximum; either converge honestly or say so
    spec = MomentSpec.from_mean_var(0.0, 0.01 * (1 - 1e-4))
    rep = solve_spd(SpdProblem(Partition(Interval(-0.1, 0.1), 200), spec))
    if rep.converged:
        assert rep.kkt["raw_moment_error"] <= 1e-8
    else:
        assert rep.diagnostics.message


@pytest.mark.parametrize("name", ["uniform", "texp", "bell", "bowl"])
def test_cross_solver_agreement(name):
    case = PRESETS[name]
    part = Partition(case.interval, 200)
    direct = solve_spd(SpdProblem(part, case.moment_spec))
    lam, diag = fit_multipliers(case.moment_spec, part)
    if not (direct.converged and diag.converged):
        pytest.skip(f"lambda route did not converge on {name}: {diag.message}")
    other = induced_density(lam, part)
    assert np.abs(other.values - direct.density.values).max() <= 1e-2


@pytest.mark.xfail(strict=True, reason="the arc-length objective is not invariant under "
                   "rescaling x, so the affine image of a solution is not a solution")
def test_scaling_covariance():
    small = solve_spd(SpdProblem(Partition(Interval(0, 0.1), 400), MomentSpec((1.0, 0.04))))
    big = solve_spd(SpdProblem(Partition(Interval(0, 1), 400), MomentSpec((1.0, 0.4))))
    mapped = small.density.values * 0.1  # f_big(y) = f_small(y / 10) / 10
    assert np.abs(mapped - big.density.values).max() <= 1e-4
