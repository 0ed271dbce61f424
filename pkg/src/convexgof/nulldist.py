"""Monte Carlo null calibration: tables, p-values, critical values, power.

Under the null the statistics are rank-based, so their law does not depend
on the common continuous distribution; null tables are therefore simulated
from standard uniforms.  Replicate i draws from its own RNG stream, a
Philox generator keyed by (seed, i) -- tables are bit-identical no matter
how replicates are partitioned across workers.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ecdf import RIGHT_CONTINUOUS, Sample
from .errors import ConvexGofError, InvalidParameterError
from .generators import ConvexGenerator, LogConvexGenerator, eval_on_array
from .statistics import (
    StatisticValue,
    WeightVector,
    k_sample_statistic,
    tau_statistic,
    two_sample_statistic,
)

TWO_SAMPLE = "two_sample"
K_SAMPLE = "k_sample"
TAU = "tau"
KINDS = (TWO_SAMPLE, K_SAMPLE, TAU)

DEFAULT_B = 9999
CHUNK = 1024  # replicates per work unit; fixed so chunking never affects values
TABLE_FORMAT_VERSION = 1
MAX_SEED = 2**64


@dataclass(frozen=True)
class NullTable:
    """Sorted simulated null statistics plus the metadata to regenerate them."""

    statistic_kind: str
    generator_name: str
    sample_sizes: tuple
    replicates: np.ndarray
    seed: int
    weights: tuple | None = None

    @property
    def B(self) -> int:
        return self.replicates.size


@dataclass(frozen=True)
class TestReport:
    """Observed statistic, Monte Carlo p-value and critical values."""

    statistic: StatisticValue
    p_value: float
    critical_values: dict
    table: NullTable
    warnings: tuple
    method: str = "simulation"


def replicate_stream(seed: int, index: int) -> np.random.Generator:
    """The RNG stream owned by replicate ``index`` of a table seeded ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed, index]))


def _check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or not 0 <= int(seed) < MAX_SEED:
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def _uniform_block(seed: int, start: int, stop: int, count: int) -> np.ndarray:
    """Uniform draws for replicates [start, stop), one row per replicate.

    Row i reproduces ``replicate_stream(seed, i).random(count)`` exactly;
    the Philox state is reassigned in place to skip per-replicate generator
    construction.
    """
    bitgen = np.random.Philox(key=[seed, 0])
    gen = np.random.Generator(bitgen)
    out = np.empty((stop - start, count))
    for row, index in enumerate(range(start, stop)):
        state = bitgen.state
        state["state"]["key"][0] = seed
        state["state"]["key"][1] = index
        state["state"]["counter"][:] = 0
        state["buffer_pos"] = 4
        bitgen.state = state
        out[row] = gen.random(count)
    return out


def _batch_statistic(kind, generator, sizes, weights, data) -> np.ndarray:
    """Vectorized statistic over rows of continuous (tie-free) pooled draws.

    Works on pooled ranks: after argsort, the running count of group-g
    members gives every empirical CDF value needed.  The arithmetic mirrors
    the observed-data path term for term.
    """
    nrep, total = data.shape
    order = np.argsort(data, axis=1)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    sl = labels[order]
    if kind == TWO_SAMPLE:
        n, m = sizes
        is_x = sl == 0
        is_y = ~is_x
        cx = np.cumsum(is_x, axis=1)
        cy = np.cumsum(is_y, axis=1)
        f_at_y = cx[is_y].reshape(nrep, m) / n
        g_at_x = cy[is_x].reshape(nrep, n) / m
        t1 = np.sum(eval_on_array(generator.eval, f_at_y), axis=1) / m
        t2 = np.sum(eval_on_array(generator.eval, g_at_x), axis=1) / n
        raw = t1 + t2
        return raw - 2.0 * generator.integral_0_1
    if kind == K_SAMPLE:
        k = len(sizes)
        masks = [sl == g for g in range(k)]
        cums = [np.cumsum(msk, axis=1) for msk in masks]
        w = weights.weights
        raw = np.zeros(nrep)
        for j in range(k):
            for l in range(k):
                if j == l:
                    continue
                vals = cums[j][masks[l]].reshape(nrep, sizes[l]) / sizes[j]
                raw += w[j] * w[l] * (np.sum(eval_on_array(generator.eval, vals), axis=1) / sizes[l])
        return raw - weights.equality_factor * generator.integral_0_1
    if kind == TAU:
        n, m = sizes
        is_x = sl == 0
        is_y = ~is_x
        cx = np.cumsum(is_x, axis=1)
        cy = np.cumsum(is_y, axis=1)
        g_at_x = cy[is_x].reshape(nrep, n) / m
        f_at_y = cx[is_y].reshape(nrep, m) / n
        dxi_n = np.diff(generator.antiderivative_grid(n))
        dxi_m = np.diff(generator.antiderivative_grid(m))
        t1 = np.sum(eval_on_array(generator.eval, g_at_x) * dxi_n, axis=1)
        t2 = np.sum(eval_on_array(generator.eval, f_at_y) * dxi_m, axis=1)
        raw = t1 + t2
        return raw - 2.0 * generator.integral_sq_0_1
    raise InvalidParameterError(f"unknown statistic kind '{kind}'")


def _check_kind_and_generator(kind, generator, sizes, weights):
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown statistic kind '{kind}'; expected one of {KINDS}")
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) == 0 or any(s < 1 for s in sizes):
        raise InvalidParameterError(f"sample sizes must all be >= 1, got {sizes}")
    if kind in (TWO_SAMPLE, TAU) and len(sizes) != 2:
        raise InvalidParameterError(f"{kind} needs exactly 2 sample sizes, got {len(sizes)}")
    if kind == K_SAMPLE:
        if len(sizes) < 2:
            raise InvalidParameterError("k_sample needs at least 2 sample sizes")
        if weights is None:
            weights = WeightVector.uniform(len(sizes))
        elif not isinstance(weights, WeightVector):
            weights = WeightVector(tuple(weights))
        if len(weights) != len(sizes):
            raise InvalidParameterError(
                f"weight count {len(weights)} does not match sample count {len(sizes)}"
            )
    elif weights is not None:
        raise InvalidParameterError(f"weights are only meaningful for {K_SAMPLE}")
    if kind == TAU:
        if not isinstance(generator, LogConvexGenerator):
            raise InvalidParameterError("tau needs a log-convex generator (e.g. expsq:alpha)")
    elif not isinstance(generator, ConvexGenerator):
        raise InvalidParameterError(f"{kind} needs a convex generator (e.g. power:2)")
    return sizes, weights


def simulate_null(kind, generator, sizes, B: int, seed: int, weights=None,
                  workers: int = 1, transform=None) -> NullTable:
    """Simulate the null distribution of a statistic at the given sizes.

    Draws B independent replicate sets of standard uniforms (distribution-
    freeness makes the choice immaterial), computes the statistic for each
    and returns the sorted table.  ``transform`` applies a strictly
    increasing map to the draws before ranking; because the statistics are
    rank-based this must not change the table, which is the checkable form
    of distribution-freeness.

    Deterministic for a fixed seed regardless of ``workers``.
    """
    sizes, weights = _check_kind_and_generator(kind, generator, sizes, weights)
    if not isinstance(B, (int, np.integer)) or B < 1:
        raise InvalidParameterError(f"replicate count B must be >= 1, got {B!r}")
    seed = _check_seed(seed)
    B = int(B)
    total = int(sum(sizes))
    if kind == TAU:
        # warm the antiderivative cache before any worker threads share it
        for s in set(sizes):
            generator.antiderivative_grid(s)

    def run_chunk(bounds):
        start, stop = bounds
        data = _uniform_block(seed, start, stop, total)
        if transform is not None:
            data = transform(data)
        return _batch_statistic(kind, generator, sizes, weights, data)

    tasks = [(a, min(a + CHUNK, B)) for a in range(0, B, CHUNK)]
    if workers <= 1 or len(tasks) == 1:
        parts = [run_chunk(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, tasks))
    replicates = np.sort(np.concatenate(parts))
    replicates.setflags(write=False)
    return NullTable(
        statistic_kind=kind,
        generator_name=generator.name,
        sample_sizes=sizes,
        replicates=replicates,
        seed=seed,
        weights=None if weights is None else weights.weights,
    )


def p_value(table: NullTable, observed: float) -> float:
    """Add-one upper-tail Monte Carlo p-value: (1 + #{t >= observed}) / (B+1)."""
    reps = table.replicates
    if reps.size == 0:
        raise InvalidParameterError("null table is empty")
    count_ge = reps.size - int(np.searchsorted(reps, observed, side="left"))
    return (1 + count_ge) / (reps.size + 1)


def _critical_rank(B: int, alpha: float):
    """Order-statistic rank for the empirical (1-alpha) quantile, with clamping."""
    if not (isinstance(alpha, (int, float, np.floating)) and 0.0 < alpha < 1.0):
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    # rank = ceil((1-alpha)(B+1)) computed as (B+1) - floor(alpha(B+1)); the
    # nudge keeps float rounding from shifting ranks at exact multiples
    rank = (B + 1) - math.floor(alpha * (B + 1) + 1e-9)
    clamped = rank > B or rank < 1
    return min(max(rank, 1), B), clamped


def critical_value(table: NullTable, alpha: float) -> float:
    """Empirical (1-alpha) quantile of the null table (upper-tail test)."""
    rank, clamped = _critical_rank(table.B, alpha)
    if clamped:
        warnings.warn(
            f"null table of size {table.B} is too small for level {alpha:g}; "
            f"critical value clamped to order statistic {rank}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(table.replicates[rank - 1])


_OBSERVED = {
    TWO_SAMPLE: lambda gen, samples, w, conv: two_sample_statistic(gen, samples[0], samples[1], conv),
    K_SAMPLE: lambda gen, samples, w, conv: k_sample_statistic(gen, samples, w, conv),
    TAU: lambda gen, samples, w, conv: tau_statistic(gen, samples[0], samples[1], conv),
}


def _permutation_null(kind, generator, samples, weights, B, seed, workers, convention):
    """Null table from permutations of the pooled observed data.

    Fallback for tied data, where simulating continuous uniforms does not
    reflect the discrete step functions actually observed.  Same stream
    contract as the simulation path.
    """
    pooled = np.concatenate([s.values for s in samples])
    sizes = tuple(s.n for s in samples)
    splits = np.cumsum(sizes)[:-1]

    def run_chunk(bounds):
        start, stop = bounds
        vals = np.empty(stop - start)
        for row, index in enumerate(range(start, stop)):
            perm = replicate_stream(seed, index).permutation(pooled)
            parts = np.split(perm, splits)
            resampled = [Sample(p, label=f"perm{g}") for g, p in enumerate(parts)]
            vals[row] = _OBSERVED[kind](generator, resampled, weights, convention).value
        return vals

    tasks = [(a, min(a + CHUNK, B)) for a in range(0, B, CHUNK)]
    if workers <= 1 or len(tasks) == 1:
        parts = [run_chunk(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, tasks))
    replicates = np.sort(np.concatenate(parts))
    replicates.setflags(write=False)
    return NullTable(
        statistic_kind=kind,
        generator_name=generator.name,
        sample_sizes=sizes,
        replicates=replicates,
        seed=seed,
        weights=None if weights is None else weights.weights,
    )


def run_test(kind, generator, samples, weights=None, B: int = DEFAULT_B, seed: int = 0,
             levels=(0.05, 0.01), convention: str = RIGHT_CONTINUOUS,
             workers: int = 1, method: str = "simulation",
             table: NullTable | None = None) -> TestReport:
    """Compute the observed statistic, calibrate its null, and report.

    The null table is simulated at the data's sample sizes (or built from
    permutations of the pooled data when ``method="permutation"``).  A
    pre-built ``table`` -- for example one loaded from a cache, which is
    bit-identical to regeneration -- skips the simulation.  Warnings surface
    cross-sample ties, unvalidated generators and levels the table is too
    small to resolve.
    """
    samples = [s if isinstance(s, Sample) else Sample(np.asarray(s, dtype=float)) for s in samples]
    sizes = tuple(s.n for s in samples)
    sizes, weights = _check_kind_and_generator(kind, generator, sizes, weights)
    if method not in ("simulation", "permutation"):
        raise InvalidParameterError(f"unknown method '{method}'; expected simulation or permutation")
    observed = _OBSERVED[kind](generator, samples, weights, convention)
    if table is not None:
        if table.statistic_kind != kind or tuple(table.sample_sizes) != sizes:
            raise InvalidParameterError(
                f"null table is for {table.statistic_kind} at sizes {table.sample_sizes}, "
                f"but the data is {kind} at sizes {sizes}"
            )
        if table.generator_name != generator.name:
            raise InvalidParameterError(
                f"null table was built for generator '{table.generator_name}', "
                f"not '{generator.name}'"
            )
    elif method == "simulation":
        table = simulate_null(kind, generator, sizes, B=B, seed=seed,
                              weights=weights, workers=workers)
    else:
        if not isinstance(B, (int, np.integer)) or B < 1:
            raise InvalidParameterError(f"replicate count B must be >= 1, got {B!r}")
        table = _permutation_null(kind, generator, samples, weights, int(B),
                                  _check_seed(seed), workers, convention)
    notes = []
    if observed.tie_count > 0:
        notes.append(
            f"{observed.tie_count} cross-sample tie pair(s) observed; the "
            f"continuous-distribution assumption is violated"
        )
        if method == "simulation":
            notes.append("consider method='permutation' for tied data")
    if not generator.validated:
        notes.append(
            f"generator '{generator.name}' was constructed without validation; "
            f"characterization not guaranteed"
        )
    cvs = {}
    for alpha in levels:
        rank, clamped = _critical_rank(table.B, alpha)
        if clamped:
            notes.append(
                f"null table too small for level {alpha:g}; critical value clamped"
            )
        cvs[float(alpha)] = float(table.replicates[rank - 1])
    return TestReport(
        statistic=observed,
        p_value=p_value(table, observed.value),
        critical_values=cvs,
        table=table,
        warnings=tuple(notes),
        method=method,
    )


ALTERNATIVES = ("shift", "scale", "lehmann")


def parse_alternative(spec: str):
    """Parse an alternative spec 'shift:d' | 'scale:s' | 'lehmann:t'."""
    head, sep, arg = str(spec).strip().partition(":")
    if not sep or head not in ALTERNATIVES:
        raise InvalidParameterError(
            f"unknown alternative spec '{spec}'; expected one of "
            + ", ".join(f"{a}:<value>" for a in ALTERNATIVES)
        )
    try:
        value = float(arg)
    except ValueError:
        raise InvalidParameterError(f"offending token '{arg}' in alternative spec '{spec}'") from None
    if head == "scale" and value <= 0:
        raise InvalidParameterError("scale alternative needs a positive factor")
    if head == "lehmann" and value <= 0:
        raise InvalidParameterError("lehmann alternative needs a positive exponent")
    return head, value


def _apply_alternative(kind_param, uniforms):
    name, value = kind_param
    if name == "shift":
        return uniforms + value
    if name == "scale":
        return uniforms * value
    return uniforms ** (1.0 / value)  # lehmann: G = F^value on the uniform baseline


def _derive_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence(entropy=(seed, tag)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PowerStudyResult:
    """Estimated rejection rates with binomial standard errors."""

    statistic_kind: str
    generator_name: str
    alternative: str
    sample_sizes: tuple
    B_null: int
    B_power: int
    seed: int
    power: dict  # level -> (estimate, standard error)


def power_study(kind, generator, alternative, sizes, B_null: int, B_power: int,
                seed: int, levels=(0.05,), weights=None, workers: int = 1) -> PowerStudyResult:
    """Estimate rejection rates against a uniform-baseline alternative.

    All groups draw standard uniforms; the last group is pushed through the
    alternative (location shift, scale factor, or Lehmann exponent).  Each
    trial computes its own fresh null table, so the per-level rejection
    indicator is exactly Bernoulli at the nominal level when the alternative
    is degenerate.  The data uniforms do not depend on the alternative's
    parameter, so power curves over the parameter share one seed lattice.
    """
    sizes, weights = _check_kind_and_generator(kind, generator, sizes, weights)
    alt = parse_alternative(alternative) if isinstance(alternative, str) else alternative
    if not isinstance(B_power, (int, np.integer)) or B_power < 1:
        raise InvalidParameterError(f"B_power must be >= 1, got {B_power!r}")
    seed = _check_seed(seed)
    data_seed = _derive_seed(seed, 1)
    table_seed_base = _derive_seed(seed, 2)
    total = int(sum(sizes))
    splits = np.cumsum(sizes)[:-1]
    rejections = {float(a): 0 for a in levels}
    for trial in range(int(B_power)):
        draws = replicate_stream(data_seed, trial).random(total)
        parts = np.split(draws, splits)
        parts[-1] = _apply_alternative(alt, parts[-1])
        samples = [Sample(p, label=f"group{g}") for g, p in enumerate(parts)]
        report = run_test(kind, generator, samples, weights=weights, B=B_null,
                          seed=_derive_seed(table_seed_base, trial),
                          levels=levels, workers=workers)
        for a in levels:
            if report.p_value <= a:
                rejections[float(a)] += 1
    power = {}
    for a, count in rejections.items():
        est = count / B_power
        power[a] = (est, math.sqrt(est * (1.0 - est) / B_power))
    return PowerStudyResult(
        statistic_kind=kind,
        generator_name=generator.name,
        alternative=alt[0] + f":{alt[1]:g}",
        sample_sizes=sizes,
        B_null=int(B_null),
        B_power=int(B_power),
        seed=seed,
        power=power,
    )


def save_table(table: NullTable, path) -> None:
    """Write a null table as a versioned CSV cache file.

    Metadata travels in ``# key=value`` header comments; replicates are
    stored as hex floats so loading is bit-identical to regeneration.
    """
    weights = "-" if table.weights is None else ",".join(repr(w) for w in table.weights)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# format_version={TABLE_FORMAT_VERSION}\n")
        fh.write(f"# statistic_kind={table.statistic_kind}\n")
        fh.write(f"# generator_name={table.generator_name}\n")
        fh.write(f"# sample_sizes={','.join(str(s) for s in table.sample_sizes)}\n")
        fh.write(f"# weights={weights}\n")
        fh.write(f"# seed={table.seed}\n")
        fh.write(f"# B={table.B}\n")
        fh.write("replicate_hex\n")
        for v in table.replicates:
            fh.write(float(v).hex() + "\n")


def load_table(path) -> NullTable:
    """Load a table written by :func:`save_table`."""
    meta = {}
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line != "replicate_hex":
                values.append(float.fromhex(line))
    version = meta.get("format_version")
    if version != str(TABLE_FORMAT_VERSION):
        raise ConvexGofError(
            f"null table file '{path}' has format version {version!r}, "
            f"expected {TABLE_FORMAT_VERSION}"
        )
    replicates = np.asarray(values)
    if replicates.size != int(meta["B"]):
        raise ConvexGofError(f"null table file '{path}' is corrupt: replicate count mismatch")
    replicates.setflags(write=False)
    weights = meta.get("weights", "-")
    return NullTable(
        statistic_kind=meta["statistic_kind"],
        generator_name=meta["generator_name"],
        sample_sizes=tuple(int(s) for s in meta["sample_sizes"].split(",")),
        replicates=replicates,
        seed=int(meta["seed"]),
        weights=None if weights == "-" else tuple(float(w) for w in weights.split(",")),
    )
