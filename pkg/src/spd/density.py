"""Grids, piecewise-constant densities and the functionals defined on them.

A density on ``[a, b]`` is represented by its values on ``n`` equal cells.
Moments use the exact cell integrals of ``x**k`` so every moment is a linear
function of the cell values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DomainError, InfeasibleError

NORMALIZATION_TOL = 1e-8


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ConstructionError(f"interval bounds must be finite, got [{a}, {b}]")
        if not a < b:
            raise ConstructionError(f"interval needs a < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def baseline_length(self) -> float:
        """Arc length of the uniform CDF, i.e. the straight line from (a, 0) to (b, 1)."""
        return math.hypot(1.0, self.length)

    def contains(self, x) -> bool:
        return self.a <= x <= self.b


@dataclass(frozen=True)
class Partition:
    """``n`` equal cells of an interval, with boundaries and midpoints."""

    interval: Interval
    n: int
    cell_width: float = field(init=False)
    edges: np.ndarray = field(init=False, repr=False, compare=False)
    midpoints: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ConstructionError(f"cell count must be a positive integer, got {self.n!r}")
        n = int(self.n)
        a, b = self.interval.a, self.interval.b
        width = (b - a) / n
        i = np.arange(n + 1, dtype=float)
        edges = a + i * width
        edges[-1] = b
        mids = a + (i[1:] - 0.5) * width
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "cell_width", width)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "midpoints", _frozen(mids))

    def cell_of(self, x):
        """0-based index of the cell containing ``x`` (right edge belongs to the last cell)."""
        idx = np.floor((np.asarray(x, dtype=float) - self.interval.a) / self.cell_width)
        return np.clip(idx, 0, self.n - 1).astype(int)


def make_partition(interval: Interval, n: int) -> Partition:
    return Partition(interval, n)


def moment_weights(partition: Partition, k: int) -> np.ndarray:
    """Exact integrals of ``z**k`` over each cell.

    Uses the factored form ``(x1 - x0) * sum_j x1**j * x0**(k-j) / (k+1)``,
    which avoids the cancellation of ``(x1**(k+1) - x0**(k+1)) / (k+1)`` on
    fine grids.
    """
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ConstructionError(f"moment order must be a non-negative integer, got {k!r}")
    k = int(k)
    x0 = partition.edges[:-1]
    x1 = partition.edges[1:]
    if k == 0:
        return np.full(partition.n, partition.cell_width)
    acc = np.zeros(partition.n)
    for j in range(k + 1):
        acc += x1**j * x0 ** (k - j)
    return (x1 - x0) * acc / (k + 1)


def moment_matrix(partition: Partition, order: int) -> np.ndarray:
    """Rows ``k = 0..order`` of :func:`moment_weights`."""
    return np.vstack([moment_weights(partition, k) for k in range(order + 1)])


@dataclass(frozen=True)
class PiecewiseDensity:
    """Nonnegative density values, constant on each cell of ``partition``."""

    partition: Partition
    values: np.ndarray = field(compare=False)
    normalized: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != self.partition.n:
            raise ConstructionError(
                f"expected {self.partition.n} density values, got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConstructionError("density values must be finite")
        if np.any(vals < 0):
            i = int(np.argmin(vals))
            raise ConstructionError(f"density value at cell {i + 1} is negative ({vals[i]!r})")
        object.__setattr__(self, "values", _frozen(vals))
        if self.normalized:
            mass = raw_moment(self, 0)
            if abs(mass - 1.0) > NORMALIZATION_TOL:
                raise ConstructionError(f"density flagged normalized but has mass {mass!r}")

    @property
    def interval(self) -> Interval:
        return self.partition.interval

    @property
    def n(self) -> int:
        return self.partition.n

    @classmethod
    def uniform(cls, partition: Partition) -> "PiecewiseDensity":
        return cls(partition, np.full(partition.n, 1.0 / partition.interval.length), True)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseDensity):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.partition, self.values.tobytes()))

    # serialization -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cell", "midpoint", "density"])
        for i, (p, v) in enumerate(zip(self.partition.midpoints, self.values), start=1):
            writer.writerow([i, f"{p:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, interval: Interval, normalized: bool = False):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or list(rows[0].keys()) != ["cell", "midpoint", "density"]:
            raise ConstructionError("density CSV needs header cell,midpoint,density")
        cells = [int(r["cell"]) for r in rows]
        if cells != list(range(1, len(rows) + 1)):
            raise ConstructionError("density CSV cell ids must run 1..n in order")
        partition = Partition(interval, len(rows))
        mids = np.array([float(r["midpoint"]) for r in rows])
        if not np.allclose(mids, partition.midpoints, rtol=0, atol=1e-12 * (1 + interval.length)):
            raise ConstructionError("density CSV midpoints do not match the interval grid")
        return cls(partition, [float(r["density"]) for r in rows], normalized)

    def to_dict(self) -> dict:
        return {
            "a": self.interval.a,
            "b": self.interval.b,
            "n": self.n,
            "values": [float(f"{v:.17g}") for v in self.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, normalized: bool = False):
        partition = Partition(Interval(data["a"], data["b"]), int(data["n"]))
        return cls(partition, data["values"], normalized)

    @classmethod
    def from_json(cls, text: str, normalized: bool = False):
        return cls.from_dict(json.loads(text), normalized)


@dataclass(frozen=True)
class MomentSpec:
    """Target raw moments ``mu_0 .. mu_m`` with ``mu_0 == 1``."""

    targets: tuple

    def __post_init__(self):
        t = tuple(float(v) for v in self.targets)
        if not t:
            raise ConstructionError("moment spec needs at least mu_0")
        if t[0] != 1.0:
            raise ConstructionError(f"mu_0 must be exactly 1, got {t[0]!r}")
        if not all(math.isfinite(v) for v in t):
            raise ConstructionError("moment targets must be finite")
        object.__setattr__(self, "targets", t)

    @property
    def order(self) -> int:
        return len(self.targets) - 1

    @classmethod
    def from_mean_var(cls, mean=None, var=None) -> "MomentSpec":
        if mean is None:
            if var is not None:
                raise ConstructionError("a variance needs a mean")
            return cls((1.0,))
        if var is None:
            return cls((1.0, mean))
        return cls((1.0, mean, var + mean * mean))

    def as_array(self) -> np.ndarray:
        return np.array(self.targets)

    def check_attainable(self, interval: Interval) -> None:
        """Reject moment sets no density on ``interval`` can reach (orders <= 2 only).

        Boundary values are excluded because only point masses attain them.
        """
        a, b = interval.a, interval.b
        if self.order >= 1:
            mu1 = self.targets[1]
            if not a < mu1 < b:
                raise InfeasibleError(f"mean {mu1!r} must lie strictly inside ({a}, {b})")
        if self.order >= 2:
            mu1, mu2 = self.targets[1], self.targets[2]
            hi = mu1 * (a + b) - a * b
            slack = 1e-12 * (b - a) ** 2  # keep round-off from admitting the boundary
            if not mu1 * mu1 + slack < mu2 < hi - slack:
                raise InfeasibleError(
                    f"second moment {mu2!r} must lie strictly inside ({mu1 * mu1!r}, {hi!r})"
                )


def raw_moment(density: PiecewiseDensity, k: int) -> float:
    return float(moment_weights(density.partition, k) @ density.values)


def path_length(density: PiecewiseDensity) -> float:
    """Arc length of the piecewise-linear CDF: ``width * sum(sqrt(1 + f_i**2))``."""
    return float(density.partition.cell_width * np.sum(np.hypot(1.0, density.values)))


def uniformity_index(density: PiecewiseDensity) -> float:
    return density.interval.baseline_length / path_length(density)


def uniformity_lower_bound(interval: Interval) -> float:
    """Infimum of the uniformity index, approached by a point mass at an endpoint."""
    return interval.baseline_length / (1.0 + interval.length)


def cdf(density: PiecewiseDensity, x):
    """Piecewise-linear CDF; accepts a scalar or an array of points in ``[a, b]``."""
    xs = np.asarray(x, dtype=float)
    iv = density.interval
    if np.any(~np.isfinite(xs)) or np.any(xs < iv.a) or np.any(xs > iv.b):
        raise DomainError(f"cdf evaluated outside [{iv.a}, {iv.b}]")
    part = density.partition
    masses = density.values * part.cell_width
    cum = np.concatenate(([0.0], np.cumsum(masses)))
    idx = part.cell_of(xs)
    out = cum[idx] + density.values[idx] * (xs - part.edges[idx])
    # right endpoint returns the full mass without round-off from the last cell
    out = np.where(xs == iv.b, cum[-1], out)
    return float(out) if out.ndim == 0 else out
