"""Time the numba kernels against their numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py [--n 400 1600 6400] [--repeat 200]``.
Compilation happens once before timing. Also times a full direct solve under
each backend in a subprocess, since the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spd import kernels
from spd._accel import USE_NUMBA
from spd.density import Interval, MomentSpec, Partition, moment_matrix

PAIRS = ("arc_length_terms", "lowrank_newton_direction", "parametric_values",
         "alternating_projection")


def _inputs(name, n, rng):
    part = Partition(Interval(-0.1, 0.1), n)
    w = moment_matrix(part, 2)
    if name == "arc_length_terms":
        return (rng.exponential(5.0, n), part.cell_width)
    if name == "lowrank_newton_direction":
        return (rng.uniform(0.1, 1.0, n), w, 1e3, rng.normal(size=n), rng.random(n) > 0.2)
    if name == "parametric_values":
        return (np.array([0.4, 0.1, -0.2]), np.linspace(-1, 1, n))
    mu = MomentSpec.from_mean_var(0.0, 0.001).as_array()
    return (rng.exponential(5.0, n), w, mu, np.linalg.inv(w @ w.T), 2000, 1e-13)


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'n':>7}{'numpy us':>12}{'numba us':>12}{'speedup':>9}")
    for name in PAIRS:
        f_np = getattr(kernels, f"_{name}_np")
        f_nb = getattr(kernels, f"_{name}_nb")
        for n in sizes:
            args = _inputs(name, n, rng)
            f_nb(*args)  # compile
            t_np = min(timeit.repeat(lambda: f_np(*args), number=repeat, repeat=3)) / repeat
            t_nb = min(timeit.repeat(lambda: f_nb(*args), number=repeat, repeat=3)) / repeat
            print(f"{name:<26}{n:>7}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>9.2f}",
                  flush=True)


SOLVE = """
import time
from spd import PRESETS, SpdProblem, solve_spd, Partition, BACKEND
c = PRESETS['bell']
solve_spd(SpdProblem(Partition(c.interval, 50), c.moment_spec))
t = time.perf_counter()
for n in {sizes}:
    solve_spd(SpdProblem(Partition(c.interval, n), c.moment_spec))
print(f"{{BACKEND:<8}} direct solves n={sizes}: {{time.perf_counter() - t:.3f}} s")
"""


def bench_solves(sizes):
    for flag in ("0", "1"):
        env = {**os.environ, "SPD_DISABLE_NUMBA": flag}
        subprocess.run([sys.executable, "-c", SOLVE.format(sizes=list(sizes))], env=env,
                       check=True)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, nargs="+", default=[400, 1600, 6400])
    p.add_argument("--repeat", type=int, default=200)
    args = p.parse_args()
    if not USE_NUMBA:
        print("numba disabled in this process; kernel timings still use both variants")
    bench_kernels(args.n, args.repeat)
    bench_solves(args.n)


if __name__ == "__main__":
    main()
