import math

import numpy as np
import pytest

from minitest.adversary import PriorUndefined
from minitest.model import NullSpec
from minitest.montecarlo import (
    empirical_radius,
    estimate_type1,
    estimate_type2,
    resolve_workers,
    wilson_interval,
)
from minitest.rates import minimax_rate

POWER_LAW = np.arange(1, 51) ** -2.0 / np.sum(np.arange(1, 51) ** -2.0)


def test_zero_null_never_rejects():
    rep = estimate_type1(NullSpec("binomial", np.zeros(5)), 50, 300, seed=1)
    assert rep.rejections == 0 and rep.rate == 0.0
    assert rep.ci_low == 0.0 and rep.ci_high > 0


def test_report_invariants():
    rep = estimate_type1(NullSpec("multinomial", POWER_LAW, eta=0.2), 100, 500, seed=3)
    assert 0 <= rep.rejections <= rep.trials
    assert rep.ci_low <= rep.rate <= rep.ci_high
    d = rep.to_dict()
    assert d["trials"] == 500 and d["seed"] == 3 and d["kind"] == "type1"


def test_wilson_matches_formula():
    k, m, z = 37, 400, 1.959963984540054
    ph = k / m
    centre = (ph + z * z / (2 * m)) / (1 + z * z / m)
    half = z / (1 + z * z / m) * math.sqrt(ph * (1 - ph) / m + z * z / (4 * m * m))
    lo, hi = wilson_interval(k, m)
    assert lo == pytest.approx(centre - half, rel=1e-9)
    assert hi == pytest.approx(centre + half, rel=1e-9)


def test_ci_width_shrinks_with_trials():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    a = estimate_type1(spec, 100, 4000, seed=5)
    b = estimate_type1(spec, 100, 8000, seed=5)
    ratio = (a.ci_high - a.ci_low) / (b.ci_high - b.ci_low)
    assert ratio == pytest.approx(math.sqrt(2), rel=0.10)


def test_uniform_type1_example():
    spec = NullSpec("multinomial", np.full(50, 0.02), eta=0.2)
    rep = estimate_type1(spec, 100, 20_000, seed=42, workers=4)
    assert rep.rate <= 0.21


def test_scale_zero_is_null_behaviour():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    t2 = estimate_type2(spec, 100, "bulk", 0.0, 2000, seed=7)
    t1 = estimate_type1(spec, 100, 2000, seed=8)
    assert t2.extra["mean_separation"] == 0.0
    sigma = math.sqrt(0.25 / 2000) * math.sqrt(2)
    assert abs(t2.rate - (1 - t1.rate)) <= 3 * sigma


def test_type2_monotone_in_scale():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    reps = [estimate_type2(spec, 100, "bulk", s, 1500, seed=9) for s in (0.0, 2.0, 5.0, 10.0)]
    rates = [r.rate for r in reps]
    for a, b in zip(reps, reps[1:]):
        assert b.rate <= a.ci_high
    assert rates[-1] < rates[0]
    seps = [r.extra["mean_separation"] for r in reps]
    assert np.all(np.diff(seps) > 0)


def test_type2_bulk_scale10_example():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    rep = estimate_type2(spec, 100, "bulk", 10.0, 3000, seed=10, workers=4)
    assert rep.rate <= spec.eta


def test_undefined_prior_propagates():
    with pytest.raises(PriorUndefined):
        estimate_type2(NullSpec("multinomial", np.full(50, 0.02)), 100, "tail", 1.0, 10, seed=0)


def test_worker_count_does_not_change_counts():
    spec = NullSpec("binomial", np.linspace(0.001, 0.3, 50), eta=0.2)
    one = estimate_type2(spec, 100, "bulk", 3.0, 800, seed=11, workers=1)
    eight = estimate_type2(spec, 100, "bulk", 3.0, 800, seed=11, workers=8)
    assert one.rejections == eight.rejections
    assert one.extra["mean_separation"] == pytest.approx(eight.extra["mean_separation"], rel=1e-12)


def test_env_var_sets_workers(monkeypatch):
    monkeypatch.setenv("MINITEST_THREADS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("MINITEST_THREADS")
    assert resolve_workers(None) == 1
    with pytest.raises(ValueError):
        resolve_workers(0)


def test_zero_trials_rejected():
    with pytest.raises(ValueError):
        estimate_type1(NullSpec("poisson", [0.1]), 10, 0, seed=0)


def test_radius_is_deterministic_and_near_rate():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    kw = dict(power_target=0.2, trials=300, seed=12, s_max=32.0, iterations=8)
    a = empirical_radius(spec, 100, "bulk", **kw)
    b = empirical_radius(spec, 100, "bulk", **kw)
    assert a.scale == b.scale and a.separation == b.separation
    assert a.report.rate <= 0.2
    ratio = a.separation / minimax_rate(spec, 100).total
    print(f"radius/rate = {ratio:.3f}")
    assert 0.05 <= ratio <= 20
    assert a.scale > 0


def test_radius_unreachable_raises():
    spec = NullSpec("multinomial", POWER_LAW, eta=0.2)
    with pytest.raises(ValueError, match="misses target"):
        empirical_radius(spec, 100, "bulk", 0.2, 200, seed=1, s_max=0.0, iterations=1)
