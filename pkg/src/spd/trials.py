"""Feasible trial densities for checking minimality.

A trial density is any nonnegative cell vector meeting the moment targets.
Trials come from alternating projections between the affine moment set and
the nonnegative orthant, started from random vectors or from a reference
density.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .density import MomentSpec, Partition, PiecewiseDensity, moment_matrix
from .errors import InfeasibleError

PROJECTION_TOL = 1e-13
MAX_SWEEPS = 200_000


def project_feasible(values, partition: Partition, spec: MomentSpec, tol=PROJECTION_TOL):
    """Alternate projections onto ``{W f = mu}`` and ``{f >= 0}`` until both hold."""
    w = moment_matrix(partition, spec.order)
    mu = spec.as_array()
    gram_inv = np.linalg.inv(w @ w.T)
    f0 = np.ascontiguousarray(values, dtype=float)
    f, sweeps, viol = kernels.alternating_projection(f0, w, mu, gram_inv, MAX_SWEEPS, tol)
    f = np.maximum(f, 0.0)
    viol = float(np.abs(w @ f - mu).max())
    if viol > max(tol, 1e-10):
        raise InfeasibleError(f"alternating projection stalled at violation {viol:.3g}")
    return PiecewiseDensity(partition, f)


def sample_feasible_densities(partition: Partition, spec: MomentSpec, count: int, rng):
    """``count`` random feasible densities.

    Even draws start from iid exponential cell values, odd draws from a random
    smooth bump profile, both scaled to unit mass before projecting.
    """
    rng = np.random.default_rng(rng)
    x = (partition.midpoints - partition.interval.a) / partition.interval.length
    out = []
    for i in range(count):
        if i % 2 == 0:
            v = rng.exponential(size=partition.n)
        else:
            k = rng.integers(1, 6)
            v = np.ones(partition.n)
            for _ in range(k):
                c, s, h = rng.uniform(0, 1), rng.uniform(0.03, 0.5), rng.exponential(2.0)
                v += h * np.exp(-0.5 * ((x - c) / s) ** 2)
        v = v / (v.sum() * partition.cell_width)
        out.append(project_feasible(v, partition, spec))
    return out
