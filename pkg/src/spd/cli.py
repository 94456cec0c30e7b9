"""Command-line driver: ``spd solve | presets | sweep | report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .density import Interval, MomentSpec
from .errors import SpdError
from .experiments import (
    PRESETS,
    CaseSpec,
    emit_report,
    rows_from_saved,
    run_bound_sweep,
    run_case,
)
from .optimizer import SolverConfig

log = logging.getLogger("spd")


def _common(p):
    p.add_argument("--n", type=int, default=None, help="number of cells (default 400)")
    p.add_argument("--out-dir", default=None, help="directory for CSV, SVG and JSON outputs")
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    p.add_argument("--trace", default=None, help="append solver iteration trace to this CSV")
    p.add_argument("--seed", type=int, default=None, help="seed for random trial densities")
    p.add_argument("--trials", type=int, default=0, help="random feasible trials per case")
    p.add_argument("--solver", choices=("direct", "lambda"), default="direct")
    p.add_argument("--multistart", type=int, default=1, help="lambda-route starting points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spd", description="Shortest-path distributions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="solve one case from flags or a JSON case file")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--mean", type=float, default=None)
    p.add_argument("--var", type=float, default=None)
    p.add_argument("--name", default="case")
    p.add_argument("--case-file", default=None)
    _common(p)

    p = sub.add_parser("presets", help="run the built-in cases")
    p.add_argument("names", nargs="*", default=[], metavar="NAME",
                   help=f"subset of {', '.join(PRESETS)}")
    _common(p)

    p = sub.add_parser("sweep", help="solve a case on growing intervals")
    p.add_argument("names", nargs="*", default=["texp", "bell"], metavar="NAME")
    p.add_argument("--case-file", default=None)
    p.add_argument("--workers", type=int, default=1)
    _common(p)

    p = sub.add_parser("report", help="re-render saved *_report.json files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    return parser


def _config(args) -> SolverConfig:
    return SolverConfig(trace_path=args.trace) if args.trace else SolverConfig()


def _load_cases(path):
    with open(path) as fh:
        data = json.load(fh)
    items = data if isinstance(data, list) else data.get("cases", [data])
    return [CaseSpec.from_dict(d) for d in items]


def _with_n(case, n):
    if n is None:
        return case
    return CaseSpec.from_dict({**case.to_dict(), "n": n})


def _case_from_flags(args) -> list:
    if args.case_file:
        return [_with_n(c, args.n) for c in _load_cases(args.case_file)]
    if args.a is None or args.b is None:
        raise SpdError("solve needs --a and --b, or --case-file")
    spec = MomentSpec.from_mean_var(args.mean, args.var)
    return [CaseSpec(args.name, Interval(args.a, args.b), spec, n=args.n or 400)]


def _check_names(names):
    unknown = [k for k in names if k not in PRESETS]
    if unknown:
        raise SpdError(f"unknown preset(s): {', '.join(unknown)}")


def _run_kwargs(args):
    return dict(out_dir=args.out_dir, config=_config(args), solver=args.solver,
                trials=args.trials, seed=args.seed, multistart=args.multistart)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.verb == "report":
            rows = [r for p in args.paths for r in rows_from_saved(p)]
        elif args.verb == "solve":
            rows = [run_case(c, **_run_kwargs(args)) for c in _case_from_flags(args)]
        elif args.verb == "presets":
            names = args.names or list(PRESETS)
            _check_names(names)
            rows = [run_case(_with_n(PRESETS[k], args.n), **_run_kwargs(args)) for k in names]
        else:
            if args.case_file:
                cases = _load_cases(args.case_file)
            else:
                _check_names(args.names)
                cases = [PRESETS[k] for k in args.names]
            rows = []
            for c in cases:
                rows += run_bound_sweep(_with_n(c, args.n), workers=args.workers,
                                        **_run_kwargs(args))
    except (SpdError, ValueError, OSError) as exc:
        print(f"spd: error: {exc}", file=sys.stderr)
        return 2
    for r in rows:
        if not r.converged:
            log.warning("%s [%g, %g]: not converged (%s)", r.case, r.a, r.b, r.message)
    text = emit_report(rows, args.format)
    sys.stdout.write(text)
    if getattr(args, "out_dir", None):
        ext = {"markdown": "md", "csv": "csv", "json": "json"}[args.format]
        with open(os.path.join(args.out_dir, f"summary.{ext}"), "w") as fh:
            fh.write(text)
    return 0 if all(r.converged for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
