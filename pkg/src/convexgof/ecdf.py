"""Samples, empirical CDFs and the empirical Stieltjes integrals.

The two integral forms consumed by the test statistics are
``integral_h_f_dg`` (integral of h(F_n) against the jump measure of G_m) and
``integral_xi_dxi`` (integral of xi(G_m) against the jumps of Xi(F_n)).
Everything here is rank-based: applying the same strictly increasing map to
both samples leaves every value bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataIngestionError, InvalidParameterError
from .generators import eval_on_array

RIGHT_CONTINUOUS = "right-continuous"
MID = "mid"
CONVENTIONS = (RIGHT_CONTINUOUS, MID)


@dataclass(frozen=True)
class Sample:
    """A finite sample of real observations plus its sorted copy."""

    values: np.ndarray
    label: str = ""
    sorted_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidParameterError(
                f"sample '{self.label}' must be a nonempty 1-d sequence of reals"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError(
                f"sample '{self.label}' contains non-finite values"
            )
        vals.setflags(write=False)
        srt = np.sort(vals)
        srt.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "sorted_values", srt)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EmpiricalCdf:
    """Step-function CDF of a sample.

    ``right-continuous`` counts observations <= x; ``mid`` averages the left
    and right limits, which softens the effect of ties on the step function.
    """

    source: Sample
    convention: str = RIGHT_CONTINUOUS

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise InvalidParameterError(
                f"unknown CDF convention '{self.convention}'; expected one of {CONVENTIONS}"
            )

    @property
    def n(self) -> int:
        return self.source.n

    def evaluate(self, x):
        """CDF value(s) at x via binary search on the sorted sample."""
        scalar = np.ndim(x) == 0
        arr = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("cdf evaluation requires finite x")
        right = np.searchsorted(self.source.sorted_values, arr, side="right")
        if self.convention == RIGHT_CONTINUOUS:
            out = right / self.n
        else:
            left = np.searchsorted(self.source.sorted_values, arr, side="left")
            out = (left + right) / (2.0 * self.n)
        return float(out) if scalar else out


def cdf_eval(cdf: EmpiricalCdf, x):
    """Free-function alias for :meth:`EmpiricalCdf.evaluate`."""
    return cdf.evaluate(x)


def cross_tie_count(a: Sample, b: Sample) -> int:
    """Number of tied cross-sample pairs (x_i == y_j).

    Nonzero counts mean the continuous-distribution assumption behind the
    theory is violated on this data; reports surface a warning.
    """
    common, ia, ib = np.intersect1d(a.sorted_values, b.sorted_values, return_indices=True)
    if common.size == 0:
        return 0
    ca = np.searchsorted(a.sorted_values, common, side="right") - np.searchsorted(
        a.sorted_values, common, side="left")
    cb = np.searchsorted(b.sorted_values, common, side="right") - np.searchsorted(
        b.sorted_values, common, side="left")
    return int(np.sum(ca * cb))


def integral_h_f_dg(h, f: EmpiricalCdf, g: EmpiricalCdf) -> float:
    """Empirical Stieltjes integral of h(F_n) against the jumps of G_m.

    Equals the average of h(F_n(y)) over g's observations; evaluation runs
    over g's sorted values so the summation order is reproducible.
    """
    vals = f.evaluate(g.source.sorted_values)
    return float(np.sum(eval_on_array(h.eval, vals)) / g.n)


def integral_xi_dxi(xi, g: EmpiricalCdf, f: EmpiricalCdf) -> float:
    """Empirical Stieltjes integral of xi(G_m) against the jumps of Xi(F_n).

    Xi(F_n) jumps by Xi(i/n) - Xi((i-1)/n) at the i-th order statistic of
    f's sample; a value repeated r times starting at rank i contributes one
    term with weight Xi((i+r-1)/n) - Xi((i-1)/n).
    """
    n = f.n
    uniq, counts = np.unique(f.source.sorted_values, return_counts=True)
    cum = np.cumsum(counts)
    grid = xi.antiderivative_grid(n)
    upper = grid[cum]
    lower = grid[np.concatenate([[0], cum[:-1]])]
    gvals = eval_on_array(xi.eval, g.evaluate(uniq))
    return float(np.sum(gvals * (upper - lower)))


def read_sample(path, label: str | None = None) -> Sample:
    """Read a single-column sample from a text/CSV file.

    ``#`` starts a comment, blank lines are skipped, and each remaining line
    must hold exactly one real number.  Parse failures name the file and
    line number.
    """
    values = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataIngestionError(f"cannot read '{path}': {exc.strerror or exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.replace(",", " ").split()
            if len(tokens) != 1:
                raise DataIngestionError(
                    f"{path}:{lineno}: expected one value per line, got {len(tokens)} tokens"
                )
            try:
                v = float(tokens[0])
            except ValueError:
                raise DataIngestionError(
                    f"{path}:{lineno}: cannot parse '{tokens[0]}' as a number"
                ) from None
            if not np.isfinite(v):
                raise DataIngestionError(f"{path}:{lineno}: non-finite value '{tokens[0]}'")
            values.append(v)
    if not values:
        raise DataIngestionError(f"{path}: no data rows found")
    import os

    return Sample(np.asarray(values), label=label if label is not None else os.path.basename(str(path)))
