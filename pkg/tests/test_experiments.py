import json
import math

import jsonschema
import numpy as np
import pytest

from spd import (
    PRESETS,
    CaseSpec,
    ComparisonRow,
    ConstructionError,
    Interval,
    MomentSpec,
    difference_ratio,
    emit_report,
    run_bound_sweep,
    run_case,
)
from spd.experiments import COLUMNS, REPORT_SCHEMA, rows_from_json, sweep_grid_sizes


@pytest.fixture(scope="module")
def preset_rows():
    return {k: run_case(c, trials=20, seed=0) for k, c in PRESETS.items()}


def test_case_reference_must_match_order():
    with pytest.raises(ConstructionError):
        CaseSpec("x", Interval(0, 1), MomentSpec((1.0, 0.3)), reference="scaled_beta")
    c = CaseSpec("x", Interval(0, 1), MomentSpec((1.0, 0.3)))
    assert c.reference == "truncated_exponential"


def test_case_dict_round_trip():
    c = PRESETS["bell"]
    assert CaseSpec.from_dict(c.to_dict()) == c
    d = CaseSpec.from_dict({"name": "m", "a": -1, "b": 1, "mean": 0.0, "var": 0.1})
    assert d.moment_spec.targets == (1.0, 0.0, 0.1)


def test_difference_ratio_rules():
    assert difference_ratio(1.2, 1.1, 1.0) == (pytest.approx(2.0), False)
    assert difference_ratio(1.0 + 1e-12, 1.0, 1.0) == (1.0, True)
    assert difference_ratio(1.1, 1.0, 1.0) == (None, False)


def test_uniform_row_degenerate(preset_rows):
    r = preset_rows["uniform"]
    assert r.degenerate and r.difference_ratio == 1.0
    assert r.spd_path_length == pytest.approx(math.sqrt(2), abs=1e-9)


@pytest.mark.parametrize("name", list(PRESETS))
def test_row_invariants(preset_rows, name):
    r = preset_rows[name]
    assert r.converged
    assert r.baseline <= r.spd_path_length + 1e-12
    assert r.spd_path_length <= r.me_path_length + 1e-6
    assert r.trial_margin >= -1e-6
    if r.spd_path_length > r.baseline + 1e-9:
        expected = (r.me_path_length - r.baseline) / (r.spd_path_length - r.baseline)
        assert r.difference_ratio == pytest.approx(expected, rel=1e-12)
    # the bowl ratio sits a hair under 1 from discretizing the SPD, not the reference
    assert r.difference_ratio >= 1 - 1e-3


def test_bell_ratio(preset_rows):
    assert preset_rows["bell"].difference_ratio == pytest.approx(2.0, abs=0.7)


def test_outputs_written(tmp_path):
    run_case(PRESETS["bell"], tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["bell_me.csv", "bell_overlay.svg", "bell_report.json", "bell_spd.csv"]
    svg = (tmp_path / "bell_overlay.svg").read_text()
    assert svg.count("<polyline") == 2 and 'stroke-dasharray="2,3"' in svg
    rep = json.loads((tmp_path / "bell_report.json").read_text())
    assert rep["row"]["case"] == "bell"


def test_plots_are_byte_identical(tmp_path):
    run_case(PRESETS["texp"], tmp_path / "a")
    run_case(PRESETS["texp"], tmp_path / "b")
    for f in ("texp_overlay.svg", "texp_spd.csv", "texp_report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seeded_trials_reproducible():
    a = run_case(PRESETS["bell"], trials=6, seed=5)
    b = run_case(PRESETS["bell"], trials=6, seed=5)
    assert a == b


def test_lambda_solver_rows():
    r = run_case(PRESETS["texp"], solver="lambda", n=200)
    assert r.converged and r.solver == "lambda"
    assert r.spd_path_length == pytest.approx(1.006, abs=0.005)


def test_failed_solve_gives_no_ratio(monkeypatch):
    from spd import experiments

    def fail(*args, **kwargs):
        return None, False, "forced failure", {}

    monkeypatch.setattr(experiments, "_solve", fail)
    r = run_case(PRESETS["bell"])
    assert not r.converged and r.difference_ratio is None and r.message == "forced failure"


# --- sweeps


def test_sweep_keeps_cell_width():
    sizes = sweep_grid_sizes(PRESETS["texp"])
    assert [n for _, n in sizes] == [400, 800, 1600, 3200]


def test_single_interval_sweep_matches_case():
    c = PRESETS["bell"]
    rows = run_bound_sweep(CaseSpec(c.name, c.interval, c.moment_spec, sweep=(c.interval,)))
    assert rows == [run_case(c)]


def test_sweep_parallel_matches_serial(tmp_path):
    c = PRESETS["texp"]
    serial = run_bound_sweep(c)
    parallel = run_bound_sweep(c, tmp_path, workers=2)
    assert serial == parallel
    svg = (tmp_path / "texp_sweep_overlay.svg").read_text()
    assert "ME (exponential)" in svg
    assert svg.count("<polyline") == 5


def test_bell_sweep_overlay_uses_normal(tmp_path):
    run_bound_sweep(PRESETS["bell"], tmp_path)
    assert "ME (normal)" in (tmp_path / "bell_sweep_overlay.svg").read_text()


# --- reports


def test_empty_report_is_header_only():
    assert emit_report([], "csv").strip() == ",".join(COLUMNS)
    md = emit_report([], "markdown").strip().splitlines()
    assert len(md) == 2
    assert json.loads(emit_report([], "json"))["rows"] == []


def test_report_formats(preset_rows):
    rows = [preset_rows[k] for k in ("texp", "bell", "bowl")]
    csv_text = emit_report(rows, "csv")
    lines = csv_text.strip().splitlines()
    assert len(lines) == 4 and lines[0].split(",")[:2] == ["case", "a"]
    assert "1.04494" in csv_text  # 6 significant digits
    md = emit_report(rows, "markdown")
    assert md.count("\n") == 5
    with pytest.raises(ValueError):
        emit_report(rows, "xml")


def test_json_report_schema_round_trip(preset_rows):
    rows = list(preset_rows.values())
    doc = json.loads(emit_report(rows, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    back = rows_from_json(emit_report(rows, "json"))
    assert emit_report(back, "json") == emit_report(rows, "json")
    assert all(isinstance(r, ComparisonRow) for r in back)
