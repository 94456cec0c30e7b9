"""Moment-matched maximum-entropy reference distributions.

Bounded kinds (uniform, truncated exponential, scaled beta) get CDF arc
lengths by adaptive quadrature; the normal is carried only for density
overlays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .density import Interval, Partition, PiecewiseDensity
from .errors import ConstructionError, InfeasibleError, UnsupportedOperationError

KINDS = ("uniform", "truncated_exponential", "scaled_beta", "normal", "exponential")
BOUNDED_KINDS = ("uniform", "truncated_exponential", "scaled_beta")

RATE_BRACKET = 1e4  # bisection bracket for rate * (b - a)
SERIES_CUTOFF = 1e-4
QUAD_TOL = 1e-10
QUAD_MAX_ERROR = 1e-8


@dataclass(frozen=True)
class ReferenceDistribution:
    """A reference density.

    ``params`` holds ``rate`` (truncated exponential and exponential),
    ``alpha``/``beta`` (scaled beta) or ``mean``/``variance`` (normal).
    Unbounded kinds carry ``interval=None``; the exponential keeps its
    location in ``params["loc"]``.
    """

    kind: str
    interval: Interval = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstructionError(f"unknown reference kind {self.kind!r}")
        if self.kind in BOUNDED_KINDS and self.interval is None:
            raise ConstructionError(f"{self.kind} needs a bounded interval")
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})

    @property
    def bounded(self) -> bool:
        return self.kind in BOUNDED_KINDS

    # densities -----------------------------------------------------------

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            return stats.norm.pdf(x, self.params["mean"], math.sqrt(self.params["variance"]))
        if self.kind == "exponential":
            r = self.params["rate"]
            return np.where(x >= self.params["loc"], r * np.exp(-r * (x - self.params["loc"])), 0.0)
        a, b = self.interval.a, self.interval.b
        inside = (x >= a) & (x <= b)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / self.interval.length, 0.0)
        if self.kind == "truncated_exponential":
            return np.where(inside, _texp_pdf(np.clip(x, a, b), a, b, self.params["rate"]), 0.0)
        al, be = self.params["alpha"], self.params["beta"]
        with np.errstate(divide="ignore"):
            return np.where(inside, stats.beta.pdf(x, al, be, loc=a, scale=b - a), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            return stats.norm.cdf(x, self.params["mean"], math.sqrt(self.params["variance"]))
        if self.kind == "exponential":
            r = self.params["rate"]
            return np.where(x >= self.params["loc"], -np.expm1(-r * (x - self.params["loc"])), 0.0)
        a, b = self.interval.a, self.interval.b
        xc = np.clip(x, a, b)
        if self.kind == "uniform":
            return (xc - a) / (b - a)
        if self.kind == "truncated_exponential":
            return _texp_cdf(xc, a, b, self.params["rate"])
        return stats.beta.cdf(xc, self.params["alpha"], self.params["beta"], loc=a, scale=b - a)

    def mean(self) -> float:
        if self.kind == "normal":
            return self.params["mean"]
        if self.kind == "exponential":
            return self.params["loc"] + 1.0 / self.params["rate"]
        a, L = self.interval.a, self.interval.length
        if self.kind == "uniform":
            return a + 0.5 * L
        if self.kind == "truncated_exponential":
            return a + L * _unit_texp_mean(self.params["rate"] * L)
        al, be = self.params["alpha"], self.params["beta"]
        return a + L * al / (al + be)

    def variance(self) -> float:
        if self.kind == "normal":
            return self.params["variance"]
        if self.kind == "exponential":
            return 1.0 / self.params["rate"] ** 2
        L = self.interval.length
        if self.kind == "uniform":
            return L * L / 12.0
        if self.kind == "truncated_exponential":
            return L * L * _unit_texp_var(self.params["rate"] * L)
        al, be = self.params["alpha"], self.params["beta"]
        s = al + be
        return L * L * al * be / (s * s * (s + 1.0))

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "a": None if self.interval is None else self.interval.a,
            "b": None if self.interval is None else self.interval.b,
            "params": dict(self.params),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceDistribution":
        iv = None if data.get("a") is None else Interval(data["a"], data["b"])
        return cls(data["kind"], iv, data.get("params", {}))

    @classmethod
    def from_json(cls, text: str) -> "ReferenceDistribution":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# truncated exponential helpers (unit interval, u = rate * length)


def _unit_texp_mean(u):
    """Mean of the truncated exponential on [0, 1] with rate ``u``."""
    if abs(u) < SERIES_CUTOFF:
        return 0.5 - u / 12.0 + u**3 / 720.0
    if u > 0:
        return 1.0 / u - math.exp(-u) / (-math.expm1(-u))
    return 1.0 - _unit_texp_mean(-u)


def _unit_texp_var(u):
    if abs(u) < 0.1:
        u2 = u * u
        return 1.0 / 12.0 - u2 / 240.0 + u2 * u2 / 6048.0 - u2 * u2 * u2 / 172800.0
    u = abs(u)
    # Var = 1/u^2 - e^u / (e^u - 1)^2, written with e^-u to avoid overflow
    e = math.exp(-u)
    return 1.0 / (u * u) - e / (math.expm1(-u) ** 2)


def _texp_pdf(x, a, b, rate):
    L = b - a
    if rate == 0.0:
        return np.full_like(x, 1.0 / L)
    if rate > 0:
        return rate * np.exp(-rate * (x - a)) / (-math.expm1(-rate * L))
    r = -rate
    return r * np.exp(-r * (b - x)) / (-math.expm1(-r * L))


def _texp_cdf(x, a, b, rate):
    L = b - a
    if rate == 0.0:
        return (x - a) / L
    if rate > 0:
        return np.expm1(-rate * (x - a)) / math.expm1(-rate * L)
    r = -rate
    return 1.0 - np.expm1(-r * (b - x)) / math.expm1(-r * L)


def match_truncated_exponential(interval: Interval, mean: float) -> ReferenceDistribution:
    """Truncated exponential on ``interval`` with the given mean.

    The rate is found by bisection on ``rate * (b - a)`` over
    ``[-RATE_BRACKET, RATE_BRACKET]``; the normalized mean is decreasing in it.
    A mean at the midpoint gives rate 0, the uniform limit.
    """
    a, L = interval.a, interval.length
    target = (float(mean) - a) / L
    if not 0.0 < target < 1.0:
        raise InfeasibleError(f"mean {mean!r} must lie strictly inside ({interval.a}, {interval.b})")
    if target == 0.5:
        return ReferenceDistribution("truncated_exponential", interval, {"rate": 0.0})
    lo, hi = -RATE_BRACKET, RATE_BRACKET
    if not _unit_texp_mean(hi) <= target <= _unit_texp_mean(lo):
        raise InfeasibleError(f"mean {mean!r} needs |rate * (b - a)| beyond {RATE_BRACKET:g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _unit_texp_mean(mid) > target:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    return ReferenceDistribution("truncated_exponential", interval, {"rate": u / L})


def match_scaled_beta(interval: Interval, mean: float, variance: float) -> ReferenceDistribution:
    """Beta on ``interval`` with the given mean and variance (method of moments)."""
    a, L = interval.a, interval.length
    m = (float(mean) - a) / L
    v = float(variance) / (L * L)
    if not 0.0 < m < 1.0:
        raise InfeasibleError(f"mean {mean!r} must lie strictly inside the interval")
    # relative margin so that round-off cannot admit the two-point boundary
    if not 0.0 < v < m * (1.0 - m) * (1.0 - 1e-12):
        raise InfeasibleError(
            f"variance {variance!r} must lie in (0, {(mean - a) * (interval.b - mean)!r})"
        )
    common = m * (1.0 - m) / v - 1.0
    return ReferenceDistribution(
        "scaled_beta", interval, {"alpha": m * common, "beta": (1.0 - m) * common}
    )


def uniform_reference(interval: Interval) -> ReferenceDistribution:
    return ReferenceDistribution("uniform", interval, {})


def match_normal(mean: float, variance: float) -> ReferenceDistribution:
    if not variance > 0:
        raise InfeasibleError("normal variance must be positive")
    return ReferenceDistribution("normal", None, {"mean": mean, "variance": variance})


def match_exponential(loc: float, mean: float) -> ReferenceDistribution:
    """Unbounded exponential on ``[loc, inf)`` with the given mean."""
    if not mean > loc:
        raise InfeasibleError("exponential mean must exceed its location")
    return ReferenceDistribution("exponential", None, {"loc": loc, "rate": 1.0 / (mean - loc)})


# --------------------------------------------------------------------------
# arc length


def reference_path_length(dist: ReferenceDistribution, tol: float = QUAD_TOL) -> float:
    """CDF arc length ``int sqrt(1 + f(x)**2) dx`` by adaptive quadrature.

    For the beta the substitution ``u = sin(theta)**2`` cancels the
    ``u**(-1/2)``-type endpoint blow-up of the density when both shapes are
    at least 1/2, leaving a bounded integrand on ``[0, pi/2]``. Raises if the
    quadrature error estimate exceeds ``QUAD_MAX_ERROR``.
    """
    if not dist.bounded:
        raise UnsupportedOperationError(f"path length is undefined for the {dist.kind} kind")
    iv = dist.interval
    L = iv.length
    if dist.kind == "uniform":
        return iv.baseline_length
    if dist.kind == "truncated_exponential":
        rate = dist.params["rate"]

        def integrand(x):
            return math.hypot(1.0, float(_texp_pdf(np.array(x), iv.a, iv.b, rate)))

        val, err = integrate.quad(integrand, iv.a, iv.b, epsabs=tol, epsrel=tol, limit=200)
    else:
        al, be = dist.params["alpha"], dist.params["beta"]
        log_c = math.log(2.0 / L) - special.betaln(al, be)

        def integrand(theta):
            s = max(math.sin(theta), 1e-300)
            c = max(math.cos(theta), 1e-300)
            g = math.exp(log_c + (2 * al - 1) * math.log(s) + (2 * be - 1) * math.log(c))
            # sqrt(1 + f^2) dx with dx = jac dtheta and f * jac = L * g
            return math.hypot(L * 2.0 * s * c, L * g)

        val, err = 0.0, 0.0
        for lo, hi in ((0.0, math.pi / 4), (math.pi / 4, math.pi / 2)):
            v, e = integrate.quad(integrand, lo, hi, epsabs=tol / 2, epsrel=tol, limit=200)
            val += v
            err += e
    if err > QUAD_MAX_ERROR:
        raise ArithmeticError(f"quadrature error estimate {err:.3g} exceeds {QUAD_MAX_ERROR:g}")
    return float(val)


# --------------------------------------------------------------------------
# discretization


def _check_interval(partition: Partition, dist: ReferenceDistribution):
    if not dist.bounded:
        raise UnsupportedOperationError(f"cannot discretize the unbounded {dist.kind} kind")
    if partition.interval != dist.interval:
        raise ConstructionError("partition and reference live on different intervals")


def reference_density_on(partition: Partition, dist: ReferenceDistribution) -> PiecewiseDensity:
    """Reference density sampled at the cell midpoints."""
    _check_interval(partition, dist)
    return PiecewiseDensity(partition, dist.pdf(partition.midpoints))


def reference_cell_averages(partition: Partition, dist: ReferenceDistribution) -> PiecewiseDensity:
    """Exact cell averages of the reference (CDF differences over the width).

    Unlike midpoint sampling this keeps the total mass at 1 even when the
    density is unbounded at an endpoint.
    """
    _check_interval(partition, dist)
    F = dist.cdf(partition.edges)
    return PiecewiseDensity(partition, np.maximum(np.diff(F), 0.0) / partition.cell_width)
