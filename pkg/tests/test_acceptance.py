"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run under pytest (lines appear in the "acceptance criteria" summary) or as a
script: ``python3 tests/test_acceptance.py``.
"""

import functools
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from conftest import record  # noqa: E402

from minitest.adversary import PriorUndefined, bulk_gamma, chi2_divergence_closed_form  # noqa: E402
from minitest.checks import check_chi2_closed_form, check_moment_means, check_moment_variances  # noqa: E402
from minitest.model import ConstantLedger, NullSpec, canonicalize  # noqa: E402
from minitest.montecarlo import estimate_type1, estimate_type2  # noqa: E402
from minitest.oracle import exact_pmf  # noqa: E402
from minitest.rates import (  # noqa: E402
    exponents,
    fixed_point_bounds,
    index_profile,
    lower_bound_terms,
    minimax_rate,
    rate_terms,
)
from minitest.sampling import poissonize_binomial, poissonize_multinomial  # noqa: E402
from test_rates import random_probability_vectors  # noqa: E402

ETA = 0.2
N_MC = 100
TRIALS = 20_000
SEED = 42


def _power_law():
    p = np.arange(1, 51) ** -2.0
    return p / p.sum()


NULLS = {
    "uniform multinomial": NullSpec("multinomial", np.full(50, 0.02), eta=ETA),
    "power-law multinomial": NullSpec("multinomial", _power_law(), eta=ETA),
    "binomial linspace": NullSpec("binomial", np.linspace(0.001, 0.3, 50), eta=ETA),
}


# ---------------------------------------------------------------- 1


def criterion_1():
    exact = exponents(1) == (2 / 3, 2 / 3) and exponents(2) == (2.0, 0.0)
    ts = np.random.default_rng(0).uniform(1, 2, 1000)
    worst = max(abs(r / 2 + b - 1) for r, b in map(exponents, ts))
    return exact and worst <= 1e-15, f"exponents(1), exponents(2) exact={exact}; max |r/2+b-1| = {worst:.1e}"


# ---------------------------------------------------------------- 2


def criterion_2():
    means = check_moment_means(seed=0, per_combo=50)
    var = check_moment_variances(seed=0, per_combo=50)
    ok = means.passed and var.passed
    return ok, (f"{means.cases} cases; max mean gap {means.worst:.1e}; "
                f"max (exact var - bound) {var.worst:.1e}; {var.detail}")


# ---------------------------------------------------------------- 3


def criterion_3():
    eq = check_chi2_closed_form(seed=0, count=50)
    worst_ratio, cases = 0.0, 0
    rng = np.random.default_rng(3)
    vectors = [spec.p for spec in NULLS.values()] + list(random_probability_vectors(30, seed=9))
    for eta in (0.1, 0.2, 0.5):
        for p in vectors:
            spec = NullSpec("binomial", np.minimum(p, 1.0), eta=eta)
            canon = canonicalize(spec)
            for n in (10, 100, 1000, int(rng.integers(10, 5000))):
                prof = index_profile(canon.work, n, 1.0, spec.constants)
                if prof.A == 0:
                    continue
                g = bulk_gamma(canon.work, prof, n, spec.constants.c_gamma, 1.0)
                cert = chi2_divergence_closed_form(canon.work[:prof.A], g, n)
                worst_ratio = max(worst_ratio, cert / (4 * (1 - eta) ** 2))
                cases += 1
    ok = eq.passed and worst_ratio <= 1.0
    return ok, (f"closed form vs enumeration max gap {eq.worst:.1e} over {eq.cases}; "
                f"certificate / 4(1-eta)^2 worst {worst_ratio:.3f} over {cases} priors")


# ---------------------------------------------------------------- 4, 5, 11


@functools.lru_cache(maxsize=None)
def type1_counts(workers=1):
    return {name: estimate_type1(spec, N_MC, TRIALS, SEED, workers) for name, spec in NULLS.items()}


@functools.lru_cache(maxsize=None)
def type2_counts(workers=1):
    out = {}
    for kind in ("bulk", "tail"):
        for name, spec in NULLS.items():
            try:
                out[kind, name] = estimate_type2(spec, N_MC, kind, 10.0, TRIALS, SEED, workers)
            except PriorUndefined:
                out[kind, name] = None
    return out


def criterion_4():
    reps = type1_counts()
    ok = all(r.rate <= ETA + 0.01 for r in reps.values())
    detail = "; ".join(f"{k} {r.rate:.4f}" for k, r in reps.items())
    return ok, f"type-I (limit {ETA + 0.01:.2f}): {detail}"


def criterion_5():
    reps = type2_counts()
    parts, ok = [], True
    for (kind, name), r in reps.items():
        if r is None:
            parts.append(f"{kind}/{name} undefined")
            continue
        ok &= r.rate <= ETA + 0.01
        parts.append(f"{kind}/{name} {r.rate:.4f}")
    return ok, f"type-II at scale 10 (limit {ETA + 0.01:.2f}): " + "; ".join(parts)


def criterion_11():
    first = {k: r.rejections for k, r in type1_counts().items()}
    first.update({k: r.rejections for k, r in type2_counts().items() if r is not None})
    type1_counts.cache_clear()
    type2_counts.cache_clear()
    again = {k: r.rejections for k, r in type1_counts().items()}
    again.update({k: r.rejections for k, r in type2_counts().items() if r is not None})
    eight = {k: r.rejections for k, r in type1_counts(8).items()}
    eight.update({k: r.rejections for k, r in type2_counts(8).items() if r is not None})
    ok = first == again == eight
    return ok, f"{len(first)} runs: replay identical={first == again}, 1 vs 8 workers identical={first == eight}"


# ---------------------------------------------------------------- 6, 7


def criterion_6():
    spec = NullSpec("multinomial", [1.0, 0.0, 0.0], t=2.0)
    vals = [minimax_rate(spec, n).total * n for n in (100, 1000, 10_000)]
    spread = max(vals) / min(vals) - 1
    return spread <= 0.01, f"total*n = {', '.join(f'{v:.6f}' for v in vals)}; spread {spread:.2%}"


def criterion_7():
    N = 10_000
    spec = NullSpec("multinomial", np.full(N, 1.0 / N), t=2.0)
    canon = canonicalize(spec)
    vals, bulk, regime = [], [], True
    for n in (1000, 4000):
        prof = index_profile(canon.work, n, 2.0, spec.constants)
        regime &= prof.I == prof.N
        rb = minimax_rate(spec, n)
        vals.append(rb.total * math.sqrt(n) * N ** 0.25)
        bulk.append(rb.bulk_term * math.sqrt(n) * N ** 0.25)
    spread = max(vals) / min(vals) - 1
    return regime and spread <= 0.05, (f"I=N: {regime}; total*sqrt(n)*N^(1/4) = {vals[0]:.4f}, {vals[1]:.4f} "
                                       f"(spread {spread:.1%}); bulk term alone {bulk[0]:.5f}, {bulk[1]:.5f}")


# ---------------------------------------------------------------- 8


def criterion_8():
    violations, worst = 0, 1.0
    for i, p in enumerate(random_probability_vectors(1000, seed=1)):
        led = ConstantLedger.defaults((0.1, 0.2, 0.5)[i % 3])
        t = 1.0 + (i % 11) / 10
        for n in (10, 100, 1000):
            prof = index_profile(p, n, t, led)
            if math.fsum(p[prof.A:] ** 2) > (led.c_A4 + led.c_I) / n ** 2 * (1 + 1e-12):
                violations += 1
            up = rate_terms(p, n, t, led).total
            lo = lower_bound_terms(p, n, t, led).total
            worst = max(worst, up / lo, lo / up)
    ok = violations == 0 and worst <= 1e3
    return ok, f"3000 cases: {violations} tail-norm violations; worst A-form/I-form ratio {worst:.2f}"


# ---------------------------------------------------------------- 9


def _tv(draws, lam):
    ks, counts = np.unique(draws, return_counts=True)
    top = max(int(ks.max()), 60)
    emp = np.zeros(top + 1)
    emp[ks] = counts / draws.size
    ref = np.array([exact_pmf("poisson", (lam,), k) for k in range(top + 1)])
    return 0.5 * (np.abs(emp - ref).sum() + max(0.0, 1 - ref.sum()))


def criterion_9():
    rng = np.random.default_rng(SEED)
    draws = 100_000
    mult = np.array([poissonize_multinomial([0.5, 0.5], 10, rng) for _ in range(draws)])
    binm = np.array([poissonize_binomial([0.3, 0.5], 10, rng) for _ in range(draws)])
    tv_m = max(_tv(mult[:, j], 5.0) for j in range(2))
    tv_b = max(_tv(binm[:, 0], 3.0), _tv(binm[:, 1], 5.0))
    rho_m = np.corrcoef(mult.T)[0, 1]
    rho_b = np.corrcoef(binm.T)[0, 1]
    ok = tv_m < 0.01 and tv_b < 0.01 and abs(rho_m) < 0.01 and abs(rho_b) < 0.01
    return ok, (f"multinomial TV {tv_m:.4f}, rho {rho_m:+.4f}; "
                f"binomial TV {tv_b:.4f}, rho {rho_b:+.4f} (shared row count gives sqrt(p1 p2) = "
                f"{math.sqrt(0.15):.4f})")


# ---------------------------------------------------------------- 10


def criterion_10():
    C, c = 2.0, 1.0
    fb = fixed_point_bounds(np.array([1.0, 0.0, 0.0]), 100, C, c)
    dirac = fb.eps_plus == C / 100 and fb.eps_minus == c / 100
    wrong = 0
    for p in random_probability_vectors(100, seed=10):
        fb = fixed_point_bounds(p, 500, C, c)
        expected = fb.eps_plus <= 16 * (C / c) * fb.eps_minus * (1 + 1e-10)
        wrong += fb.bounds_match != expected
    return dirac and wrong == 0, f"Dirac exact (C/n, c/n)={dirac}; flag disagreements {wrong}/100"


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def _check(k):
    passed, detail = CRITERIA[k]()
    record(k, passed, detail)
    assert passed, detail


def test_criterion_1():
    _check(1)


def test_criterion_2():
    _check(2)


def test_criterion_3():
    _check(3)


def test_criterion_4():
    _check(4)


def test_criterion_5():
    _check(5)


def test_criterion_6():
    _check(6)


def test_criterion_7():
    _check(7)


def test_criterion_8():
    _check(8)


def test_criterion_9():
    _check(9)


def test_criterion_10():
    _check(10)


def test_criterion_11():
    _check(11)


if __name__ == "__main__":
    failed = 0
    for k, fn in CRITERIA.items():
        passed, detail = fn()
        record(k, passed, detail)
        failed += not passed
    sys.exit(1 if failed else 0)
