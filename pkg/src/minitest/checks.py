"""Cross-validation of the closed forms against the enumeration oracles.

Each check returns a :class:`CheckResult`; :func:`run_battery` runs them
all with a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import oracle
from .adversary import chi2_cosh_bound, chi2_divergence_closed_form
from .statistics import moments_t1, moments_t2, moments_t_bulk


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "cases": self.cases,
                "worst": self.worst, "detail": self.detail}


def _random_pair(rng, model, N):
    if model == "multinomial":
        v = rng.dirichlet(np.ones(N + 1))
        w = rng.dirichlet(np.ones(N + 1))
        return np.sort(v[1:])[::-1], w[1:]
    if model == "binomial":
        return np.sort(rng.uniform(0.01, 1.0, N))[::-1], rng.uniform(0.0, 1.0, N)
    return np.sort(rng.uniform(0.01, 2.0, N))[::-1], rng.uniform(0.0, 2.0, N)


def moment_cases(rng, per_combo=50, models=("binomial", "poisson", "multinomial"), ts=(1.0, 1.5, 2.0)):
    """Random ``(model, t, kind, p, q, size, A, closed, exact)`` comparisons."""
    for model in models:
        for t in ts:
            for _ in range(per_combo):
                N = int(rng.integers(1, 4))
                k = int(rng.integers(1, 5))
                A = int(rng.integers(0, N + 1))
                p, q = _random_pair(rng, model, N)
                closed = {
                    "t_bulk": moments_t_bulk(p, q, A, k, t, model),
                    "t2": moments_t2(p, q, k, A, model),
                    "t1": moments_t1(p, q, k, A, model),
                }
                for kind, m in closed.items():
                    ex = oracle.enumerate_statistic_moments(p, q, k, kind, model, t, A)
                    yield model, t, kind, m, ex


def check_moment_means(seed=0, per_combo=50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, n = 0.0, 0
    for *_, m, ex in moment_cases(rng, per_combo):
        worst = max(worst, abs(m.mean - ex.mean))
        n += 1
    return CheckResult("moment means vs enumeration", worst <= 1e-12, n, worst)


def check_moment_variances(seed=0, per_combo=50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_exact, worst_gap, n = 0.0, -math.inf, 0
    for *_, m, ex in moment_cases(rng, per_combo):
        worst_exact = max(worst_exact, abs(m.variance_exact - ex.variance))
        worst_gap = max(worst_gap, ex.variance - m.variance_upper)
        n += 1
    ok = worst_exact <= 1e-12 and worst_gap <= 1e-12
    return CheckResult("variance bounds dominate exact variance", ok, n, worst_gap,
                       f"max |exact closed form - enumeration| = {worst_exact:.3e}")


def feasible_gammas(rng, count=50):
    """Random ``(p, gamma, n)`` with ``N <= 2``, ``n <= 4`` and ``0 <= gamma_i <= min(p_i, 1-p_i)``."""
    for _ in range(count):
        N = int(rng.integers(1, 3))
        n = int(rng.integers(1, 5))
        p = rng.uniform(0.02, 0.98, N)
        g = rng.uniform(0, 1, N) * np.minimum(p, 1 - p)
        yield p, g, n


def check_chi2_closed_form(seed=0, count=50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, n = 0.0, 0
    for p, g, nn in feasible_gammas(rng, count):
        a = chi2_divergence_closed_form(p, g, nn)
        b = oracle.exact_mixture_chi2(p, g, nn)
        worst = max(worst, abs(a - b))
        n += 1
    return CheckResult("chi-square closed form vs enumeration", worst <= 1e-12, n, worst)


def check_cosh_bound(seed=0, count=200) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, n = -math.inf, 0
    for _ in range(count):
        N = int(rng.integers(1, 20))
        nn = int(rng.integers(1, 200))
        p = rng.uniform(0.01, 0.5, N)
        g = rng.uniform(0, 1, N) * p / math.sqrt(nn)
        one_plus = 1.0 + chi2_divergence_closed_form(p, g, nn)
        bound = chi2_cosh_bound(p, g, nn)
        worst = max(worst, one_plus / bound - 1.0)
        n += 1
    return CheckResult("cosh bound dominates the product", worst <= 1e-12, n, worst)


def check_tail_collisions(seed=0, count=50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, n = -math.inf, 0
    for _ in range(count):
        m = int(rng.integers(1, 3))
        nn = int(rng.integers(1, 5))
        tail = np.sort(rng.uniform(0, 0.2, m))[::-1]
        p = np.concatenate([[0.4], tail])
        pi_bar = float(rng.uniform(tail.max(), 1.0))
        res = oracle.exact_tv_tail_prior(p, 2, pi_bar, nn)
        worst = max(worst, res.collision_null - math.fsum(nn * nn * tail ** 2))
        if not 0.0 <= res.tv <= 1.0:
            return CheckResult("tail collision mass <= sum n^2 p^2", False, n + 1, res.tv, "TV outside [0,1]")
        n += 1
    return CheckResult("tail collision mass <= sum n^2 p^2", worst <= 1e-15, n, worst)


def check_pmfs(seed=0, count=200) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, n = 0.0, 0
    for _ in range(count):
        m = int(rng.integers(0, 60))
        p = float(rng.uniform())
        k = int(rng.integers(0, m + 1))
        worst = max(worst, abs(oracle.exact_pmf("binomial", (m, p), k) - float(stats.binom.pmf(k, m, p))))
        lam = float(rng.uniform(0, 50))
        k = int(rng.integers(0, 100))
        worst = max(worst, abs(oracle.exact_pmf("poisson", (lam,), k) - float(stats.poisson.pmf(k, lam))))
        n += 2
    return CheckResult("log-space pmfs vs scipy", worst <= 1e-12, n, worst)


BATTERY: tuple[Callable[..., CheckResult], ...] = (
    check_moment_means,
    check_moment_variances,
    check_chi2_closed_form,
    check_cosh_bound,
    check_tail_collisions,
    check_pmfs,
)


def run_battery(seed: int = 0) -> list[CheckResult]:
    return [check(seed=seed) for check in BATTERY]
