"""Test statistics: two-sample, weighted k-sample, and the log-convex tau.

Each statistic is the empirical plug-in of a population functional minus
its centering constant (the value the functional takes when all
distributions coincide).  No finite-n bias correction is applied; Monte
Carlo calibration of the null absorbs it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ecdf import (
    RIGHT_CONTINUOUS,
    EmpiricalCdf,
    Sample,
    cross_tie_count,
    integral_h_f_dg,
    integral_xi_dxi,
)
from .errors import InvalidParameterError
from .generators import ConvexGenerator, LogConvexGenerator

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Positive weights p_1..p_k summing to one."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) == 0:
            raise InvalidParameterError("weight vector must be nonempty")
        if any(not np.isfinite(v) or v <= 0 for v in w):
            raise InvalidParameterError(f"weights must be positive reals, got {w}")
        if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameterError(f"weights sum to {sum(w)!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, k: int) -> "WeightVector":
        if k < 1:
            raise InvalidParameterError("weight vector needs k >= 1")
        return cls(tuple(1.0 / k for _ in range(k)))

    def __len__(self):
        return len(self.weights)

    @property
    def equality_factor(self) -> float:
        """1 - sum(p_j^2), the k-sample centering multiplier."""
        return 1.0 - sum(v * v for v in self.weights)


@dataclass(frozen=True)
class StatisticValue:
    """A computed statistic with its raw functional and centering constant."""

    value: float
    raw_functional: float
    centering_constant: float
    tie_count: int
    generator_name: str


def two_sample_statistic(h: ConvexGenerator, x: Sample, y: Sample,
                         convention: str = RIGHT_CONTINUOUS) -> StatisticValue:
    """Symmetric two-sample statistic centered at twice the h integral."""
    f = EmpiricalCdf(x, convention)
    g = EmpiricalCdf(y, convention)
    raw = integral_h_f_dg(h, f, g) + integral_h_f_dg(h, g, f)
    centering = 2.0 * h.integral_0_1
    return StatisticValue(
        value=raw - centering,
        raw_functional=raw,
        centering_constant=centering,
        tie_count=cross_tie_count(x, y),
        generator_name=h.name,
    )


def k_sample_statistic(h: ConvexGenerator, samples, weights: WeightVector | None = None,
                       convention: str = RIGHT_CONTINUOUS) -> StatisticValue:
    """Weighted k-sample statistic over all ordered pairs of samples.

    Both ordered pairs (j, l) and (l, j) enter the sum; centering is
    (1 - sum p^2) times the h integral.  Weights default to uniform.
    """
    samples = list(samples)
    k = len(samples)
    if k < 2:
        raise InvalidParameterError(f"k-sample statistic needs at least 2 samples, got {k}")
    if weights is None:
        weights = WeightVector.uniform(k)
    if len(weights) != k:
        raise InvalidParameterError(
            f"weight count {len(weights)} does not match sample count {k}"
        )
    cdfs = [EmpiricalCdf(s, convention) for s in samples]
    w = weights.weights
    raw = 0.0
    for j in range(k):
        for l in range(k):
            if j == l:
                continue
            raw += w[j] * w[l] * integral_h_f_dg(h, cdfs[j], cdfs[l])
    centering = weights.equality_factor * h.integral_0_1
    ties = 0
    for j in range(k):
        for l in range(j + 1, k):
            ties += cross_tie_count(samples[j], samples[l])
    return StatisticValue(
        value=raw - centering,
        raw_functional=raw,
        centering_constant=centering,
        tie_count=ties,
        generator_name=h.name,
    )


def tau_statistic(xi: LogConvexGenerator, x: Sample, y: Sample,
                  convention: str = RIGHT_CONTINUOUS) -> StatisticValue:
    """Log-convex two-sample statistic centered at twice the xi^2 integral."""
    f = EmpiricalCdf(x, convention)
    g = EmpiricalCdf(y, convention)
    raw = integral_xi_dxi(xi, g, f) + integral_xi_dxi(xi, f, g)
    centering = 2.0 * xi.integral_sq_0_1
    return StatisticValue(
        value=raw - centering,
        raw_functional=raw,
        centering_constant=centering,
        tie_count=cross_tie_count(x, y),
        generator_name=xi.name,
    )
