"""Monte Carlo estimates of type-I and type-II errors.

Trial ``i`` draws everything from ``trial_rng(seed, i)``, so a count depends
only on ``(spec, n, trials, seed)``: not on the number of workers nor on the
order in which trials finish.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import binomtest

from .adversary import PriorUndefined, draw
from .model import CanonicalNull, PriorKind, canonicalize
from .rates import index_profile
from .sampling import sample_null_or_alt, trial_rng
from .statistics import effective_profile, run_test


@dataclass(frozen=True)
class RiskReport:
    """Counts from one batch of trials.

    ``rate`` is the rejection rate for a type-I run and the acceptance rate
    for a type-II run; the interval is the 95% Wilson interval for it.
    """

    trials: int
    rejections: int
    rate: float
    ci_low: float
    ci_high: float
    seed: int
    wall_time: float
    kind: str = "type1"
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "trials": self.trials,
            "rejections": self.rejections,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "seed": self.seed,
            "wall_time": self.wall_time,
        }
        d.update(self.extra)
        return d


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        env = os.environ.get("MINITEST_THREADS")
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def _run_trials(trial_fn: Callable[[int], bool], trials: int, workers: int) -> int:
    """Number of trials for which ``trial_fn`` returns True."""
    if workers == 1 or trials < 2:
        return sum(1 for i in range(trials) if trial_fn(i))
    bounds = np.linspace(0, trials, min(workers, trials) + 1).astype(int)

    def chunk(lo_hi):
        lo, hi = lo_hi
        return sum(1 for i in range(lo, hi) if trial_fn(i))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(chunk, zip(bounds[:-1], bounds[1:])))


class _Plan:
    """Everything about a test at fixed ``n`` that does not depend on the data."""

    def __init__(self, spec, n: int, test_options: Optional[dict] = None):
        self.canon: CanonicalNull = spec if isinstance(spec, CanonicalNull) else canonicalize(spec)
        self.spec = self.canon.spec
        self.n = n
        opts = dict(test_options or {})
        self.l2_single = opts.pop("l2_single", True)
        self.options = opts
        self.test_profile = effective_profile(self.canon, n, self.l2_single)
        self.prior_profile = index_profile(self.canon.work, n, self.spec.t, self.spec.constants)

    def rejects(self, q, rng) -> bool:
        sample = sample_null_or_alt(self.spec.model_kind, q, self.n, rng, canon=self.canon)
        verdict = run_test(self.canon, sample, profile=self.test_profile,
                           l2_single=self.l2_single, **self.options)
        return verdict.decide_aggregate


def _report(kind, successes, rejections, trials, seed, t0, extra=None) -> RiskReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lo, hi = wilson_interval(successes, trials)
    return RiskReport(trials=trials, rejections=rejections, rate=successes / trials, ci_low=lo,
                      ci_high=hi, seed=seed, wall_time=time.perf_counter() - t0, kind=kind,
                      extra=extra or {})


def estimate_type1(spec, n: int, trials: int, seed: int, workers: Optional[int] = None,
                   test_options: Optional[dict] = None) -> RiskReport:
    """Rejection frequency of the aggregated test on data drawn from the null."""
    t0 = time.perf_counter()
    plan = _Plan(spec, n, test_options)
    p = plan.spec.p

    def trial(i):
        return plan.rejects(p, trial_rng(seed, i))

    rej = _run_trials(trial, trials, resolve_workers(workers))
    return _report("type1", rej, rej, trials, seed, t0)


def _type2_trial(plan: _Plan, prior_kind: PriorKind, scale: float, seed: int, i: int):
    rng = trial_rng(seed, i)
    d = draw(prior_kind, plan.canon, plan.n, rng, scale=scale, profile=plan.prior_profile)
    return plan.rejects(d.q, rng), d.realized_separation


def estimate_type2(spec, n: int, prior_kind, scale: float, trials: int, seed: int,
                   workers: Optional[int] = None, test_options: Optional[dict] = None) -> RiskReport:
    """Acceptance frequency when each trial's data come from a fresh prior draw.

    This averages the type-II error over the prior rather than taking the
    worst alternative.  ``extra["mean_separation"]`` is the mean realized
    l_t distance of the draws.
    """
    t0 = time.perf_counter()
    plan = _Plan(spec, n, test_options)
    kind = PriorKind(prior_kind)
    seps = np.zeros(trials)

    def trial(i):
        rejected, sep = _type2_trial(plan, kind, scale, seed, i)
        seps[i] = sep
        return rejected

    rej = _run_trials(trial, trials, resolve_workers(workers))
    acc = trials - rej
    extra = {"prior_kind": kind.value, "scale": scale, "mean_separation": math.fsum(seps) / trials}
    return _report("type2", acc, rej, trials, seed, t0, extra)


@dataclass(frozen=True)
class RadiusResult:
    scale: float
    separation: float
    report: RiskReport

    def to_dict(self) -> dict:
        return {"scale": self.scale, "separation": self.separation, "report": self.report.to_dict()}


def empirical_radius(spec, n: int, prior_kind, power_target: float, trials: int, seed: int,
                     s_max: float = 64.0, iterations: int = 20, workers: Optional[int] = None,
                     test_options: Optional[dict] = None) -> RadiusResult:
    """Smallest prior scale whose type-II frequency is at most ``power_target``.

    Bisects over ``[0, s_max]`` with the same seed at every scale, and
    returns the mean realized separation at the scale found.  Raises
    ``ValueError`` when even ``s_max`` misses the target.
    """
    def at(s):
        return estimate_type2(spec, n, prior_kind, s, trials, seed, workers, test_options)

    hi_rep = at(s_max)
    if hi_rep.rate > power_target:
        raise ValueError(f"type-II {hi_rep.rate:.4f} at s_max={s_max} misses target {power_target}")
    lo, hi = 0.0, s_max
    best = hi_rep
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        rep = at(mid)
        if rep.rate <= power_target:
            hi, best = mid, rep
        else:
            lo = mid
    return RadiusResult(scale=hi, separation=best.extra["mean_separation"], report=best)


__all__ = [
    "PriorUndefined",
    "RadiusResult",
    "RiskReport",
    "empirical_radius",
    "estimate_type1",
    "estimate_type2",
    "resolve_workers",
    "wilson_interval",
]
