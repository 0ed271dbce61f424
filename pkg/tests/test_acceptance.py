"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; every expected value is either exact, derived from an independent
oracle in this file, or a documented closed form.
"""

import io
import json

import numpy as np

from convexgof import (
    K_SAMPLE,
    Sample,
    TAU,
    TWO_SAMPLE,
    WeightVector,
    bernstein_generator,
    cli,
    cvm_distance,
    enumerate_null,
    exp_sq_generator,
    jensen_gap,
    log_convex_functional,
    max_probability,
    population_functional,
    population_gap,
    power_cdf,
    power_generator,
    run_battery,
    run_test,
    simulate_null,
    tau_statistic,
    two_sample_statistic,
    uniform_cdf,
)
from convexgof.nulldist import _derive_seed, replicate_stream
from convexgof.oracle import battery_cdf_pairs, battery_generators

from oracle_helpers import expsq_antiderivative, simpson

SQUARE = power_generator(2)
GRID_129 = np.linspace(0.0, 1.0, 129)


def report(criterion, passed, detail):
    print(f"[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'} -- {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def test_c01_two_sample_worked_value():
    stat = two_sample_statistic(SQUARE, Sample([1.0, 3.0]), Sample([2.0, 4.0]))
    err = abs(stat.value - 1.0 / 12.0)
    report(1, err < 1e-15, f"two-sample statistic on the worked data: |err| = {err:.2e}")


def test_c02_cvm_identity_and_battery():
    f, g = uniform_cdf(), power_cdf(2)
    gap = population_functional(SQUARE, f, g) - 2.0 / 3.0
    cvm = cvm_distance(f, g)
    ok = abs(gap - 1.0 / 30.0) < 1e-8 and abs(cvm - 1.0 / 30.0) < 1e-8
    cases = run_battery()
    cvm_cases = [c for c in cases if c.check == "cvm-identity"]
    ineq_cases = [c for c in cases if c.check == "strict-inequality"]
    ok = ok and len(cvm_cases) == 3 and all(c.passed for c in cvm_cases)
    ok = ok and len(ineq_cases) == 12 and all(c.passed for c in ineq_cases)
    report(2, ok, f"gap = {gap:.10f}, cvm = {cvm:.10f}, "
                  f"{len(cvm_cases)} identity + {len(ineq_cases)} inequality cases")


def test_c03_equality_characterization():
    gens = battery_generators()
    pairs = battery_cdf_pairs()
    worst_eq = 0.0
    for h in gens:
        for cdf in {c.name: c for pair in pairs for c in pair}.values():
            worst_eq = max(worst_eq, abs(population_gap(h, cdf, cdf)))
    worst_ineq = min(population_gap(h, f, g) for h in gens for f, g in pairs)
    ok = worst_eq < 1e-8 and worst_ineq > 1e-6
    report(3, ok, f"max |gap| at F=G: {worst_eq:.2e}; min gap at F!=G: {worst_ineq:.2e}")


def test_c04_k_sample_factor():
    gap = jensen_gap(SQUARE, [uniform_cdf(), power_cdf(2)], WeightVector((0.5, 0.5)))
    eq = jensen_gap(SQUARE, [uniform_cdf(), uniform_cdf()], WeightVector((0.5, 0.5)))
    ok = abs(gap - 1.0 / 120.0) < 1e-9 and abs(eq) < 1e-8
    report(4, ok, f"k=2 gap = {gap:.12f} (want 1/120), equal-CDF gap = {eq:.2e}")


def test_c05_distribution_freeness():
    plain = simulate_null(TWO_SAMPLE, SQUARE, (20, 20), B=1000, seed=20260808)
    via_exp = simulate_null(TWO_SAMPLE, SQUARE, (20, 20), B=1000, seed=20260808,
                            transform=np.exp)
    via_atan = simulate_null(TWO_SAMPLE, SQUARE, (20, 20), B=1000, seed=20260808,
                             transform=np.arctan)
    ok = (np.array_equal(plain.replicates, via_exp.replicates)
          and np.array_equal(plain.replicates, via_atan.replicates))
    report(5, ok, "null tables bit-identical under exp and arctan transforms")


def test_c06_exact_vs_simulated_null():
    exact = enumerate_null(TWO_SAMPLE, SQUARE, (2, 2))
    B = 100_000
    table = simulate_null(TWO_SAMPLE, SQUARE, (2, 2), B=B, seed=31)
    details = []
    ok = exact.values.size == 2
    for value, prob in zip(exact.values, exact.probabilities):
        freq = float(np.mean(np.isclose(table.replicates, value, atol=1e-12)))
        tol = 3.0 * np.sqrt(prob * (1.0 - prob) / B)
        details.append(f"P({value:.4f}): {freq:.4f} vs {prob:.4f} (tol {tol:.4f})")
        ok = ok and abs(freq - prob) < tol
    report(6, ok, "; ".join(details))


def test_c07_level_calibration():
    runs, n, B, alpha, seed = 2000, 30, 999, 0.05, 1717
    data_seed = _derive_seed(seed, 1)
    table_seed = _derive_seed(seed, 2)
    rejections = 0
    for r in range(runs):
        draws = replicate_stream(data_seed, r).random(2 * n)
        x, y = Sample(draws[:n]), Sample(draws[n:])
        rep = run_test(TWO_SAMPLE, SQUARE, [x, y], B=B,
                       seed=_derive_seed(table_seed, r), levels=(alpha,))
        if rep.p_value <= alpha:
            rejections += 1
    rate = rejections / runs
    ok = abs(rate - alpha) <= 0.015
    report(7, ok, f"H0 rejection rate over {runs} runs: {rate:.4f} (want {alpha} +/- 0.015)")


def test_c08_max_interpretation():
    f = uniform_cdf()
    details = []
    ok = True
    for m in (1, 2, 5):
        est = max_probability(m, f, f, n_trials=100_000, seed=100 + m)
        target = 1.0 / (m + 1)
        ok = ok and abs(est.estimate - target) <= 4.0 * max(est.std_error, 1e-6)
        details.append(f"m={m}: {est.estimate:.4f} vs {target:.4f} (se {est.std_error:.4f})")
    report(8, ok, "; ".join(details))


def test_c09_bernstein_convergence():
    ok = True
    details = []
    for m in (4, 8, 16):
        bm = bernstein_generator(SQUARE, m)
        sup = float(np.max(np.abs(bm.eval(GRID_129) - GRID_129**2)))
        ok = ok and abs(sup - 1.0 / (4.0 * m)) < 1e-12
        details.append(f"sup|B_{m} - h| = {sup:.6f}")
    for f, g in battery_cdf_pairs():
        target = population_functional(SQUARE, f, g)
        errors = [abs(population_functional(bernstein_generator(SQUARE, m), f, g) - target)
                  for m in (4, 8, 16, 32)]
        ok = ok and all(a > b for a, b in zip(errors, errors[1:]))
    report(9, ok, "; ".join(details) + "; population functionals decrease monotonically")


def test_c10_log_convex_inequality():
    xi = exp_sq_generator(1.0)
    # centering recomputed with the independent fixed-panel Simpson oracle
    xi_sq_twice = 2.0 * simpson(lambda v: np.exp(2.0 * v * v), 0.0, 1.0)
    f, g = uniform_cdf(), power_cdf(2)
    eq_err = abs(log_convex_functional(xi, f, f) - xi_sq_twice)
    ok = eq_err < 1e-7
    for ff, gg in battery_cdf_pairs():
        ok = ok and log_convex_functional(xi, ff, gg) > xi_sq_twice + 1e-6
    # worked tau value reassembled from the erfi closed form
    xi_half = expsq_antiderivative(1.0, 0.5)
    xi_one = expsq_antiderivative(1.0, 1.0)
    term_f = 1.0 * xi_half + np.exp(0.25) * (xi_one - xi_half)
    term_g = np.exp(0.25) * xi_half + np.e * (xi_one - xi_half)
    expected_tau = term_f + term_g - xi_sq_twice
    got = tau_statistic(xi, Sample([1.0, 3.0]), Sample([2.0, 4.0]))
    tau_err = abs(got.value - expected_tau)
    ok = ok and tau_err < 1e-8
    report(10, ok, f"equality error {eq_err:.2e} (2*int xi^2 = {xi_sq_twice:.8f}); "
                   f"tau worked value {got.value:.9f} vs oracle {expected_tau:.9f}")


def test_c11_determinism_across_workers(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.CACHE_ENV, str(tmp_path / "cache"))
    ok = True
    base_two = simulate_null(TWO_SAMPLE, SQUARE, (15, 15), B=2000, seed=8, workers=1)
    base_tau = simulate_null(TAU, exp_sq_generator(1.0), (12, 12), B=2000, seed=8, workers=1)
    base_k = simulate_null(K_SAMPLE, SQUARE, (8, 8, 8), B=2000, seed=8, workers=1)
    for workers in (2, 8):
        ok = ok and np.array_equal(
            base_two.replicates,
            simulate_null(TWO_SAMPLE, SQUARE, (15, 15), B=2000, seed=8, workers=workers).replicates)
        ok = ok and np.array_equal(
            base_tau.replicates,
            simulate_null(TAU, exp_sq_generator(1.0), (12, 12), B=2000, seed=8, workers=workers).replicates)
        ok = ok and np.array_equal(
            base_k.replicates,
            simulate_null(K_SAMPLE, SQUARE, (8, 8, 8), B=2000, seed=8, workers=workers).replicates)
    # end-to-end: CLI reports byte-identical across worker counts
    x = tmp_path / "x.csv"
    y = tmp_path / "y.csv"
    rng = np.random.default_rng(0)
    x.write_text("".join(f"{float(v)!r}\n" for v in rng.random(15)))
    y.write_text("".join(f"{float(v)!r}\n" for v in rng.random(15)))
    outputs = []
    for workers in (1, 2, 8):
        out = io.StringIO()
        code = cli.run(["test2", "--h", "power:2", "--x", str(x), "--y", str(y),
                        "--B", "1500", "--seed", "21", "--workers", str(workers),
                        "--deterministic", "--no-cache"], out=out, err=io.StringIO())
        ok = ok and code == 0
        outputs.append(out.getvalue())
    ok = ok and outputs[0] == outputs[1] == outputs[2]
    # sanity: the reports really carry content
    ok = ok and json.loads(outputs[0])["null_table"]["B"] == 1500
    report(11, ok, "tables and reports byte-identical at 1, 2 and 8 workers")
