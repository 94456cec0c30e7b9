"""Case studies: SPD versus moment-matched maximum-entropy references.

A case pairs an interval and raw-moment targets with the maximum-entropy
family for that constraint set (uniform for normalization only, truncated
exponential for a fixed mean, scaled beta for mean and variance). Running a
case solves the SPD, measures both CDF arc lengths and forms the difference
ratio against the uniform baseline.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .density import Interval, MomentSpec, Partition, PiecewiseDensity, path_length
from .direct import SolveReport, SpdProblem, solve_spd
from .errors import ConstructionError, SpdError
from .euler_lagrange import (
    MultiplierVector,
    default_initial_multipliers,
    feasibility_margin,
    fit_multipliers,
    induced_density,
)
from .optimizer import SolverConfig
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
from .svg import line_plot, step_xy
from .trials import project_feasible, sample_feasible_densities

DEGENERATE_TOL = 1e-9
REFERENCE_FOR_ORDER = {0: "uniform", 1: "truncated_exponential", 2: "scaled_beta"}


@dataclass(frozen=True)
class CaseSpec:
    name: str
    interval: Interval
    moment_spec: MomentSpec
    reference: str = None
    n: int = 400
    sweep: tuple = ()

    def __post_init__(self):
        m = self.moment_spec.order
        expected = REFERENCE_FOR_ORDER.get(m)
        ref = self.reference or expected
        if expected is None or ref != expected:
            raise ConstructionError(
                f"no maximum-entropy reference of kind {ref!r} for {m} moment constraints"
            )
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "sweep", tuple(self.sweep))
        self.moment_spec.check_attainable(self.interval)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "a": self.interval.a,
            "b": self.interval.b,
            "moments": list(self.moment_spec.targets),
            "reference": self.reference,
            "n": self.n,
            "sweep": [[iv.a, iv.b] for iv in self.sweep],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CaseSpec":
        if "moments" in data:
            spec = MomentSpec(tuple(data["moments"]))
        else:
            spec = MomentSpec.from_mean_var(data.get("mean"), data.get("var"))
        return cls(
            name=data.get("name", "case"),
            interval=Interval(data["a"], data["b"]),
            moment_spec=spec,
            reference=data.get("reference"),
            n=int(data.get("n", 400)),
            sweep=tuple(Interval(a, b) for a, b in data.get("sweep", ())),
        )


PRESETS = {
    "uniform": CaseSpec("uniform", Interval(0.0, 1.0), MomentSpec((1.0,))),
    "texp": CaseSpec(
        "texp",
        Interval(0.0, 0.1),
        MomentSpec.from_mean_var(0.04),
        sweep=tuple(Interval(0.0, b) for b in (0.1, 0.2, 0.4, 0.8)),
    ),
    "bell": CaseSpec(
        "bell",
        Interval(-0.1, 0.1),
        MomentSpec.from_mean_var(0.0, 0.001),
        sweep=tuple(Interval(-h, h) for h in (0.1, 0.2, 0.4)),
    ),
    "bowl": CaseSpec("bowl", Interval(-0.1, 0.1), MomentSpec.from_mean_var(0.0, 0.005)),
}


@dataclass
class ComparisonRow:
    case: str
    a: float
    b: float
    n: int
    solver: str
    spd_path_length: float
    me_path_length: float
    baseline: float
    difference_ratio: float = None
    spd_uniformity: float = None
    me_uniformity: float = None
    peak_density: float = None
    trial_margin: float = None
    converged: bool = True
    degenerate: bool = False
    message: str = ""


COLUMNS = tuple(f.name for f in fields(ComparisonRow))


def build_reference(case: CaseSpec) -> ReferenceDistribution:
    t = case.moment_spec.targets
    if case.reference == "uniform":
        return uniform_reference(case.interval)
    if case.reference == "truncated_exponential":
        return match_truncated_exponential(case.interval, t[1])
    return match_scaled_beta(case.interval, t[1], t[2] - t[1] * t[1])


def unbounded_reference(case: CaseSpec):
    """Unbounded maximum-entropy counterpart used as the sweep overlay, if any."""
    t = case.moment_spec.targets
    if case.moment_spec.order == 1:
        return match_exponential(case.interval.a, t[1])
    if case.moment_spec.order == 2:
        return match_normal(t[1], t[2] - t[1] * t[1])
    return None


def difference_ratio(me_length, spd_length, baseline, tol=DEGENERATE_TOL):
    """``(me - baseline) / (spd - baseline)``.

    Returns ``(ratio, degenerate)``. When both excesses are below ``tol`` the
    ratio is reported as 1 with ``degenerate=True``; when only the
    denominator vanishes the ratio is ``None``.
    """
    num = me_length - baseline
    den = spd_length - baseline
    if abs(num) < tol and abs(den) < tol:
        return 1.0, True
    if den <= 0:
        return None, False
    return num / den, False


def minimality_margin(spd_length, partition, spec, reference, trials=0, seed=None):
    """Smallest ``L[trial] - L[spd]`` over feasible trial densities.

    The maximum-entropy trial is the cell-averaged reference, projected onto
    the discrete moment constraints so that it competes on equal terms.
    """
    me_trial = project_feasible(reference_cell_averages(partition, reference).values,
                                partition, spec)
    lengths = [path_length(me_trial)]
    if trials:
        lengths += [path_length(d)
                    for d in sample_feasible_densities(partition, spec, trials, seed)]
    return min(lengths) - spd_length


def _solve(case: CaseSpec, partition, config, solver, multistart, seed):
    if solver == "direct":
        report = solve_spd(SpdProblem(partition, case.moment_spec), config)
        return report.density, report.converged, report.diagnostics.message, report.to_dict()
    if solver != "lambda":
        raise ValueError(f"unknown solver {solver!r}")
    starts = [default_initial_multipliers(case.moment_spec, case.interval)]
    rng = np.random.default_rng(seed)
    while len(starts) < max(1, multistart):
        base = np.array(starts[0].lambdas)
        trial = MultiplierVector(tuple(base[0] * rng.uniform(0.5, 1.0) for _ in (0,))
                                 + tuple(base[1:]))
        if feasibility_margin(trial, partition) > 0:
            starts.append(trial)
    best = None
    for start in starts:
        lam, diag = fit_multipliers(case.moment_spec, partition, start, config)
        if best is None or diag.objective_value < best[1].objective_value:
            best = (lam, diag)
        if diag.converged:
            break
    lam, diag = best
    try:
        density = induced_density(lam, partition)
    except SpdError as exc:
        return None, False, str(exc), {"multipliers": lam.to_dict(), "diagnostics": diag.to_dict()}
    return density, diag.converged, diag.message, {
        "multipliers": lam.to_dict(),
        "diagnostics": diag.to_dict(),
        "density": density.to_dict(),
    }


def run_case(case: CaseSpec, out_dir=None, config: SolverConfig = None, solver="direct",
             trials=0, seed=None, multistart=1, n=None, interval=None, stem=None):
    """Solve one case and compare it with its reference.

    ``n`` and ``interval`` override the case's grid (used by sweeps). When
    ``out_dir`` is given, writes ``<stem>_spd.csv``, ``<stem>_me.csv``,
    ``<stem>_overlay.svg`` and ``<stem>_report.json``.
    """
    iv = interval or case.interval
    if iv != case.interval:
        case = replace(case, interval=iv)
    n = int(n or case.n)
    partition = Partition(iv, n)
    reference = build_reference(case)
    baseline = iv.baseline_length
    me_len = reference_path_length(reference)

    density, converged, message, solve_dict = _solve(case, partition, config, solver,
                                                     multistart, seed)
    row = ComparisonRow(case=case.name, a=iv.a, b=iv.b, n=n, solver=solver,
                        spd_path_length=math.nan, me_path_length=me_len, baseline=baseline,
                        me_uniformity=baseline / me_len, converged=converged, message=message)
    if density is not None:
        spd_len = path_length(density)
        row.spd_path_length = spd_len
        row.spd_uniformity = baseline / spd_len
        row.peak_density = float(density.values.max())
        if converged:
            row.difference_ratio, row.degenerate = difference_ratio(me_len, spd_len, baseline)
            row.trial_margin = minimality_margin(spd_len, partition, case.moment_spec,
                                                 reference, trials, seed)

    if out_dir is not None:
        stem = stem or case.name
        os.makedirs(out_dir, exist_ok=True)
        me_density = reference_density_on(partition, reference)
        with open(os.path.join(out_dir, f"{stem}_me.csv"), "w") as fh:
            fh.write(me_density.to_csv())
        if density is not None:
            with open(os.path.join(out_dir, f"{stem}_spd.csv"), "w") as fh:
                fh.write(density.to_csv())
        with open(os.path.join(out_dir, f"{stem}_overlay.svg"), "w") as fh:
            fh.write(overlay_svg(case, partition, density, reference))
        payload = {"case": case.to_dict(), "row": asdict(row), "reference": reference.to_dict(),
                   "solve": solve_dict}
        with open(os.path.join(out_dir, f"{stem}_report.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return row


def overlay_svg(case, partition, density, reference):
    series = []
    if density is not None:
        x, y = step_xy(partition.edges, density.values)
        series.append({"x": x, "y": y, "label": "SPD"})
    xs = np.linspace(partition.interval.a, partition.interval.b, 801)[1:-1]
    series.append({"x": xs, "y": reference.pdf(xs), "label": f"ME ({reference.kind})",
                   "dashed": True})
    ymax = None
    if density is not None:
        ymax = 1.15 * max(float(density.values.max()), float(reference.pdf(partition.midpoints).max()))
    return line_plot(series, title=f"{case.name}: SPD (solid) vs ME (dotted)", ymax=ymax)


def _sweep_job(args):
    case, iv, n, config, solver, trials, seed, multistart = args
    return run_case(case, None, config, solver, trials, seed, multistart, n=n, interval=iv)


def sweep_grid_sizes(case: CaseSpec):
    """Cell counts that keep the base case's cell width on every sweep interval."""
    intervals = case.sweep or (case.interval,)
    width = case.interval.length / case.n
    return [(iv, max(case.moment_spec.order + 2, int(round(iv.length / width))))
            for iv in intervals]


def run_bound_sweep(case: CaseSpec, out_dir=None, config=None, solver="direct", trials=0,
                    seed=None, multistart=1, workers=1):
    """Solve the case on each of its sweep intervals, in order."""
    jobs = [(case, iv, n, config, solver, trials, seed, multistart)
            for iv, n in sweep_grid_sizes(case)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        series = []
        for i, (iv, n) in enumerate(sweep_grid_sizes(case)):
            sub = replace(case, interval=iv)
            density, _, _, _ = _solve(sub, Partition(iv, n), config, solver, multistart, seed)
            if density is None:
                continue
            with open(os.path.join(out_dir, f"{case.name}_sweep{i + 1}_spd.csv"), "w") as fh:
                fh.write(density.to_csv())
            x, y = step_xy(density.partition.edges, density.values)
            series.append({"x": x, "y": y, "label": f"SPD [{iv.a:g}, {iv.b:g}]"})
        unbounded = unbounded_reference(case)
        if unbounded is not None:
            last = (case.sweep or (case.interval,))[-1]
            xs = np.linspace(last.a, last.b, 1601)
            series.append({"x": xs, "y": unbounded.pdf(xs), "label": f"ME ({unbounded.kind})",
                           "dashed": True})
        with open(os.path.join(out_dir, f"{case.name}_sweep_overlay.svg"), "w") as fh:
            fh.write(line_plot(series, title=f"{case.name}: SPDs on growing supports"))
        with open(os.path.join(out_dir, f"{case.name}_sweep_report.json"), "w") as fh:
            json.dump({"case": case.to_dict(), "rows": [asdict(r) for r in rows]}, fh,
                      indent=2, sort_keys=True)
    return rows


# --------------------------------------------------------------------------
# reports

REPORT_SCHEMA = {
    "type": "object",
    "required": ["columns", "rows"],
    "properties": {
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": list(COLUMNS),
                "properties": {
                    "case": {"type": "string"},
                    "a": {"type": "number"},
                    "b": {"type": "number"},
                    "n": {"type": "integer"},
                    "solver": {"type": "string"},
                    "spd_path_length": {"type": ["number", "null"]},
                    "me_path_length": {"type": "number"},
                    "baseline": {"type": "number"},
                    "difference_ratio": {"type": ["number", "null"]},
                    "spd_uniformity": {"type": ["number", "null"]},
                    "me_uniformity": {"type": ["number", "null"]},
                    "peak_density": {"type": ["number", "null"]},
                    "trial_margin": {"type": ["number", "null"]},
                    "converged": {"type": "boolean"},
                    "degenerate": {"type": "boolean"},
                    "message": {"type": "string"},
                },
            },
        },
    },
}


def _sig6(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    if isinstance(v, bool) or isinstance(v, (int, str)):
        return v
    return float(f"{v:.6g}")


def _cell(v):
    v = _sig6(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_report(rows, fmt="markdown") -> str:
    """Render rows as ``csv``, ``json`` or ``markdown`` with a fixed column order."""
    rows = list(rows)
    if fmt == "json":
        doc = {"columns": list(COLUMNS),
               "rows": [{c: _sig6(getattr(r, c)) for c in COLUMNS} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        for r in rows:
            lines.append("| " + " | ".join(_cell(getattr(r, c)) for c in COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def rows_from_json(text: str):
    doc = json.loads(text)
    return [ComparisonRow(**{c: row[c] for c in COLUMNS}) for row in doc["rows"]]


def rows_from_saved(path: str):
    """Rows from a ``*_report.json``, a sweep report, or an emitted JSON report."""
    with open(path) as fh:
        doc = json.load(fh)
    if "row" in doc:
        return [ComparisonRow(**doc["row"])]
    return [ComparisonRow(**{c: r.get(c) for c in COLUMNS}) for r in doc["rows"]]
