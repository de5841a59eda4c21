"""Acceptance criteria for the mixture-of-Gaussians reproduction and the rate certificate.

Each test records one PASS/FAIL line; ``conftest.py`` prints them at the end of
the session, and ``python3 tests/test_acceptance.py`` prints them directly.
The training criteria take roughly twenty minutes on one core.
"""

import functools
import time
from dataclasses import replace

import numpy as np

from vdm.densities import PAPER_GMM, best_fit, exact_divergence, gaussian
from vdm.autodiff import LinearGenerator
from vdm.divergences import make_spec
from vdm.saddle import certify
from vdm.trainer import (GMM_DIVERGENCES, GMM_REFIT, GMM_TRAIN, cross_matrix, objective_exact,
                         refit_variational, train)
from vdm.verify import SUITES

LINES = []

# reference optimal fits: (D_f, mu*, sigma*)
ORACLE_TABLE = {
    "kl": (0.2831, 1.0100, 1.8308),
    "reverse-kl": (0.2480, 1.5782, 1.6319),
    "jensen-shannon": (0.1280, 1.3070, 1.7542),
    "jeffrey": (0.5705, 1.3218, 1.7034),
    "pearson-chi2": (0.6457, 0.5737, 1.9274),
}

# reference learned models: (F, mu_hat, sigma_hat)
LEARNED_TABLE = {
    "kl": (0.2801, 1.0335, 1.8236),
    "reverse-kl": (0.2415, 1.5624, 1.6403),
    "jensen-shannon": (0.1226, 1.2854, 1.7659),
    "jeffrey": (0.5151, 1.2295, 1.8087),
    "pearson-chi2": (0.6379, 0.6157, 1.9031),
}

# reference cross matrix: rows trained for, columns evaluated with
CROSS_TABLE = np.array([
    [0.2808, 0.3423, 0.1314, 0.5447, 0.7345],
    [0.3518, 0.2414, 0.1228, 0.5794, 1.3974],
    [0.2871, 0.2760, 0.1210, 0.5260, 0.92160],
    [0.2869, 0.2975, 0.1247, 0.5236, 0.8849],
    [0.2970, 0.5466, 0.1665, 0.7085, 0.648],
])

SEEDS = (0, 1, 2)


def report(criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    LINES.append(line)
    print(line)


@functools.lru_cache(maxsize=None)
def oracle_fits():
    start = time.perf_counter()
    fits = {name: best_fit(make_spec(name), PAPER_GMM) for name in GMM_DIVERGENCES}
    return fits, time.perf_counter() - start


@functools.lru_cache(maxsize=None)
def learned_runs():
    """{name: [(seed, F_hat, mu_hat, sigma_hat, gen)]} and per-divergence seconds."""
    runs, seconds = {}, {}
    for name in GMM_DIVERGENCES:
        spec = make_spec(name)
        start = time.perf_counter()
        rows = []
        for seed in SEEDS:
            gen, net, _ = train(spec, PAPER_GMM, replace(GMM_TRAIN, seed=seed))
            rows.append((seed, objective_exact(spec, net, gen, PAPER_GMM), gen.mu, gen.sigma, gen))
        runs[name] = rows
        seconds[name] = time.perf_counter() - start
    return runs, seconds


@functools.lru_cache(maxsize=None)
def matrix_run():
    runs, _ = learned_runs()
    trained = {name: runs[name][0][4] for name in GMM_DIVERGENCES}
    matrix, gens = cross_matrix(PAPER_GMM, GMM_TRAIN, GMM_REFIT, trained=trained)
    return matrix, gens


def test_criterion_1_oracle_table():
    fits, seconds = oracle_fits()
    misses = []
    for name, (d_pub, mu_pub, sg_pub) in ORACLE_TABLE.items():
        fit = fits[name]
        for label, got, pub in (("D_f", fit.value, d_pub), ("mu*", fit.mu, mu_pub),
                                ("sigma*", fit.sigma, sg_pub)):
            if abs(got - pub) > 0.01:
                misses.append(f"{name} {label} {got:.4f} vs {pub:.4f}")
    ok = not misses and seconds < 120
    report(1, ok, f"{15 - len(misses)}/15 entries within 0.01, {seconds:.1f} s"
           + (f"; off: {', '.join(misses)}" if misses else ""))
    assert seconds < 120
    assert not misses, misses


def test_criterion_2_learned_models():
    runs, seconds = learned_runs()
    good, notes = [], []
    for name, (f_pub, mu_pub, sg_pub) in LEARNED_TABLE.items():
        seed_ok = [abs(f - f_pub) <= 0.05 and abs(mu - mu_pub) <= 0.08 and abs(sg - sg_pub) <= 0.08
                   for _, f, mu, sg, _ in runs[name]]
        fast = seconds[name] < 300
        if all(seed_ok) and fast:
            good.append(name)
        worst = max(runs[name], key=lambda r: max(abs(r[1] - f_pub), abs(r[2] - mu_pub),
                                                  abs(r[3] - sg_pub)))
        notes.append(f"{name} {sum(seed_ok)}/3 seeds ({seconds[name]:.0f} s, "
                     f"worst F={worst[1]:.4f} mu={worst[2]:.4f} sigma={worst[3]:.4f})")
    report(2, len(good) >= 4, f"{len(good)}/5 divergences within tolerance on all seeds; "
           + "; ".join(notes))
    assert len(good) >= 4, notes


def test_criterion_3_lower_bound():
    fits, _ = oracle_fits()
    gaps = {}
    for name in GMM_DIVERGENCES:
        spec = make_spec(name)
        fit = fits[name]
        gen = LinearGenerator.from_sigma(fit.mu, fit.sigma)
        _, est = refit_variational(spec, None, gen, PAPER_GMM, GMM_REFIT)
        gaps[name] = est - fit.value
    matrix, gens = matrix_run()
    cross_gap = max(
        matrix[i, j] - exact_divergence(make_spec(col), PAPER_GMM, gaussian(gens[row].mu, gens[row].sigma))
        for i, row in enumerate(GMM_DIVERGENCES) for j, col in enumerate(GMM_DIVERGENCES))
    ok = max(gaps.values()) <= 0.02 and cross_gap <= 0.02
    report(3, ok, "refit minus oracle at best fit: "
           + ", ".join(f"{k} {v:+.4f}" for k, v in gaps.items())
           + f"; max over the 25 cross cells {cross_gap:+.4f}")
    assert ok


def test_criterion_4_cross_matrix():
    matrix, _ = matrix_run()
    n = len(GMM_DIVERGENCES)
    col_min_diag = all(np.argmin(matrix[:, j]) == j for j in range(n))
    row_min_diag = all(np.argmin(matrix[i, :]) == i for i in range(n))
    diag_err = np.abs(np.diag(matrix) - np.diag(CROSS_TABLE))
    ok = col_min_diag and diag_err.max() <= 0.08
    report(4, ok, "diagonal " + ", ".join(f"{v:.4f}" for v in np.diag(matrix))
           + f"; max diagonal deviation {diag_err.max():.4f}; each column minimised on the "
           f"diagonal: {col_min_diag} (literal row minima on the diagonal: {row_min_diag}, also "
           f"false for the reference matrix)")
    assert col_min_diag
    assert diag_err.max() <= 0.08


def test_criterion_5_saddle_certificate():
    start = time.perf_counter()
    rows = certify(n_instances=20, steps=200, points=100, seed=0)
    seconds = time.perf_counter() - start
    rate_ok = all(r["rate_passed"] and r["worst_ratio"] <= r["rate_bound"] + 1e-9 for r in rows)
    gap = max(r["max_decrease_gap"] for r in rows)
    dims = sorted({r["n_theta"] + r["n_omega"] for r in rows})
    ok = rate_ok and gap <= 1e-9 and seconds < 10
    report(5, ok, f"20 instances (total dims {dims[0]}-{dims[-1]}), rate bound held: {rate_ok}, "
           f"max sufficient-decrease gap {gap:.2e}, {seconds:.2f} s")
    assert ok


def test_criterion_6_property_suites():
    failures, counts = [], {}
    for name in ("conjugates", "gradients", "bounds"):
        checks = SUITES[name]()
        counts[name] = len(checks)
        failures += [f"{c.suite}/{c.name}: {c.detail}" for c in checks if not c.passed]
    report(6, not failures, ", ".join(f"{k} {v} checks" for k, v in counts.items())
           + (f"; failing: {failures}" if failures else "; all pass"))
    assert not failures, failures


def test_criterion_7_out_of_scope():
    report(7, True, "image-data experiments are not part of this package (nothing to check)")


if __name__ == "__main__":
    for fn in (test_criterion_1_oracle_table, test_criterion_5_saddle_certificate,
               test_criterion_6_property_suites, test_criterion_2_learned_models,
               test_criterion_3_lower_bound, test_criterion_4_cross_matrix,
               test_criterion_7_out_of_scope):
        try:
            fn()
        except AssertionError:
            pass
