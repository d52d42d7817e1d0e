"""The test battery: weighted chi-square on the bulk, tail mass and tail
collision tests, and closed-form moments of the statistics.

Statistics are sums over canonical coordinates of the working vector, so a
verdict does not depend on the order in which coordinates were supplied.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import NamedTuple, Optional

import numpy as np

from .model import (
    CanonicalNull,
    ConstantLedger,
    IndexProfile,
    ModelKind,
    NullSpec,
    SampleSet,
    SpecError,
    TestVerdict,
    canonicalize,
)
from .rates import exponents, index_profile


class StatisticError(RuntimeError):
    """An internal contract of a statistic was violated."""


def _offset(canon: Optional[CanonicalNull]) -> int:
    return 0 if canon is None else canon.offset


def _bulk_weights(p_bulk: np.ndarray, b: float) -> np.ndarray:
    if np.any(p_bulk <= 0):
        raise StatisticError("bulk contains a zero null coordinate")
    return p_bulk ** (-b)


def t_bulk(sample: SampleSet, canon: CanonicalNull, profile: IndexProfile) -> float:
    """``sum_{i<=A} p_i^{-b} (S_i/k - p_i)(S'_i/k - p_i)``."""
    A, k = profile.A, sample.k
    if A < 1:
        raise StatisticError("empty bulk (A = 0): the bulk test must be skipped")
    if k < 1:
        raise StatisticError("the split statistic needs n >= 2")
    o = canon.offset
    p = canon.work[:A]
    w = _bulk_weights(p, profile.b)
    x = sample.S[o:o + A] / k - p
    y = sample.S_prime[o:o + A] / k - p
    return math.fsum(w * x * y)


def t_bulk_nosplit(sample: SampleSet, canon: CanonicalNull, profile: IndexProfile,
                   correction: str = "printed") -> float:
    """Bulk statistic on the full histogram ``H``, without sample splitting.

    ``correction="printed"`` subtracts ``H_j`` inside the bracket;
    ``"scaled"`` subtracts ``H_j / n^2``, the unbiased version.
    """
    A, n = profile.A, sample.n
    if A < 1:
        raise StatisticError("empty bulk (A = 0): the bulk test must be skipped")
    if n < 1:
        raise StatisticError("need at least one observation")
    o = canon.offset
    p = canon.work[:A]
    w = _bulk_weights(p, profile.b)
    H = sample.histogram[o:o + A].astype(float)
    if correction == "printed":
        corr = H
    elif correction == "scaled":
        corr = H / float(n) ** 2
    else:
        raise ValueError("correction must be 'printed' or 'scaled'")
    return math.fsum(w * ((H / n - p) ** 2 - corr))


def t1_tail(sample: SampleSet, canon: CanonicalNull, profile: IndexProfile) -> float:
    """``sum_{i>A} N_i/n - p_i``: observed minus expected tail mass."""
    n = sample.n
    if n < 1:
        raise StatisticError("need at least one observation")
    o = canon.offset
    A = profile.A
    p = canon.work[A:]
    H = sample.histogram[o + A:]
    return math.fsum(H / n - p)


def t2_tail(sample: SampleSet, canon: CanonicalNull, profile: IndexProfile) -> float:
    """Unweighted split chi-square on the tail coordinates."""
    k = sample.k
    if k < 1:
        raise StatisticError("the split statistic needs n >= 2")
    o = canon.offset
    A = profile.A
    p = canon.work[A:]
    x = sample.S[o + A:] / k - p
    y = sample.S_prime[o + A:] / k - p
    return math.fsum(x * y)


def psi2_collision(sample: SampleSet, profile: IndexProfile, canon: Optional[CanonicalNull] = None) -> bool:
    """True iff some tail coordinate (index > A) is observed at least twice."""
    o = _offset(canon)
    return bool(np.any(sample.histogram[o + profile.A:] >= 2))


def thresholds(canon: CanonicalNull, profile: IndexProfile, n: int,
               ledger: ConstantLedger) -> tuple[float, float]:
    """``(uc/n) (sum_{i<=A} p_i^r)^{1/2}`` and ``uc sqrt(sum_{i>A} p_i / n)``."""
    p = canon.work
    A = profile.A
    bulk_mass = math.fsum(p[:A] ** profile.r) if A else 0.0
    tail_mass = math.fsum(p[A:]) if A < p.size else 0.0
    thr_bulk = ledger.uc / n * math.sqrt(bulk_mass)
    thr_t1 = ledger.uc * math.sqrt(tail_mass / n)
    return thr_bulk, thr_t1


def threshold_t2(canon: CanonicalNull, profile: IndexProfile, n: int, ledger: ConstantLedger) -> float:
    tail = canon.work[profile.A:]
    return ledger.uc / n * math.sqrt(math.fsum(tail * tail)) if tail.size else 0.0


def impossible_under_null(sample: SampleSet, canon: CanonicalNull) -> bool:
    """An observation landed on a coordinate the null gives probability 0."""
    o = canon.offset
    return bool(np.any((canon.work == 0) & (sample.histogram[o:] > 0)))


def effective_profile(canon: CanonicalNull, n: int, l2_single: bool = True) -> IndexProfile:
    """Index profile used by :func:`run_test`.

    With ``t = 2`` and ``l2_single`` every positive coordinate is treated as
    bulk (``I = N``, ``A`` = number of positive entries): one unweighted
    chi-square covers bulk and tail.  Zero coordinates stay in the tail.
    """
    spec = canon.spec
    prof = index_profile(canon.work, n, spec.t, spec.constants)
    if l2_single and spec.t >= 2.0:
        prof = replace(prof, I=prof.N, A=int(np.count_nonzero(canon.work > 0)))
    return prof


def run_test(spec, sample: SampleSet, *, include_t2: bool = False, nosplit: Optional[str] = None,
             strict: bool = True, l2_single: bool = True,
             profile: Optional[IndexProfile] = None) -> TestVerdict:
    """Run the aggregated test ``psi_bulk or psi_1 or psi_2`` on one sample.

    ``nosplit`` replaces the split bulk statistic by the histogram version
    (``"printed"`` or ``"scaled"`` correction); ``include_t2`` adds the
    split tail chi-square test to the aggregate.  ``profile`` skips the
    index computation when the caller already has it for this ``n``.
    """
    canon = spec if isinstance(spec, CanonicalNull) else canonicalize(spec)
    spec = canon.spec
    if sample.histogram.size != spec.N:
        raise SpecError(f"dimension mismatch: sample has {sample.histogram.size} coordinates, spec has N={spec.N}")
    n = sample.n
    if n < 1:
        raise SpecError("need at least one observation")
    prof = profile if profile is not None else effective_profile(canon, n, l2_single)
    if prof.n != n or prof.N != canon.work.size:
        raise SpecError("profile was computed for a different sample size or null")
    thr_bulk, thr_t1 = thresholds(canon, prof, n, spec.constants)

    if prof.A >= 1 and (sample.k >= 1 or nosplit):
        tb = (t_bulk_nosplit(sample, canon, prof, nosplit) if nosplit
              else t_bulk(sample, canon, prof))
        decide_bulk = tb > thr_bulk
    else:
        tb, decide_bulk = 0.0, False
    t1 = t1_tail(sample, canon, prof)
    decide_t1 = abs(t1) > thr_t1
    collision = psi2_collision(sample, prof, canon)

    t2 = thr_t2 = None
    decide_t2 = False
    if include_t2 and sample.k >= 1 and prof.A < prof.N:
        t2 = t2_tail(sample, canon, prof)
        thr_t2 = threshold_t2(canon, prof, n, spec.constants)
        decide_t2 = abs(t2) > thr_t2

    reason = None
    if strict and impossible_under_null(sample, canon):
        reason = "impossible-under-null"
    return TestVerdict(
        t_bulk=tb, t1=t1, collision_found=collision, thr_bulk=thr_bulk, thr_t1=thr_t1,
        decide_bulk=bool(decide_bulk), decide_t1=bool(decide_t1), decide_psi2=collision,
        profile=prof, t2=t2, thr_t2=thr_t2, decide_t2=decide_t2, reason=reason,
    )


def frobenius_test(P, sample_S, sample_S_prime, k: int, n: int, C_eta: float) -> tuple[float, bool]:
    """l2 test on a symmetric probability matrix, flattened to its upper triangle.

    ``sample_S`` / ``sample_S_prime`` are the two half-sample edge-count
    matrices.  Rejects iff ``|T_2| > C_eta ||P|| / n``.
    """
    from .rates import flatten_upper

    p = flatten_upper(P)
    x = flatten_upper(sample_S) / k - p
    y = flatten_upper(sample_S_prime) / k - p
    T2 = math.fsum(x * y)
    return T2, abs(T2) > C_eta * math.sqrt(math.fsum(p * p)) / n


# ---------------------------------------------------------------- moments


class Moments(NamedTuple):
    mean: float
    variance_upper: float
    variance_exact: float


def _half_variance(q: np.ndarray, k: int, model: ModelKind) -> np.ndarray:
    if model is ModelKind.POISSON:
        return q / k
    return q * (1.0 - q) / k


def _split_product_moments(p, q, weights, k, model, cov_scale=None):
    """Moments of ``sum_i w_i (S_i/k - p_i)(S'_i/k - p_i)``."""
    d = q - p
    s2 = _half_variance(q, k, model)
    mean = math.fsum(weights * d * d)
    upper = math.fsum(weights ** 2 * (q * q / k ** 2 + 2.0 * q * d * d / k))
    exact = math.fsum(weights ** 2 * (s2 * s2 + 2.0 * s2 * d * d))
    if model is ModelKind.MULTINOMIAL and q.size > 1:
        # Cov(X_i, X_j) = -q_i q_j / k within a half; the two halves are independent
        c = -np.outer(q, q) / k
        cross = weights[:, None] * weights[None, :] * (c * c + 2.0 * c * np.outer(d, d))
        np.fill_diagonal(cross, 0.0)
        exact += math.fsum(cross.ravel())
    return Moments(mean, upper, exact)


def moments_t_bulk(p, q, A: int, k: int, t: float, model="binomial") -> Moments:
    """Mean, variance upper bound and exact variance of the bulk statistic.

    ``p`` and ``q`` are working vectors; the bulk is their first ``A``
    entries.
    """
    model = ModelKind.parse(model)
    p = np.asarray(p, dtype=float)[:A]
    q = np.asarray(q, dtype=float)[:A]
    if A == 0:
        return Moments(0.0, 0.0, 0.0)
    _, b = exponents(t)
    return _split_product_moments(p, q, _bulk_weights(p, b), k, model)


def moments_t2(p, q, k: int, A: int, model="binomial") -> Moments:
    model = ModelKind.parse(model)
    p = np.asarray(p, dtype=float)[A:]
    q = np.asarray(q, dtype=float)[A:]
    if p.size == 0:
        return Moments(0.0, 0.0, 0.0)
    return _split_product_moments(p, q, np.ones_like(p), k, model)


def moments_t1(p, q, n: int, A: int, model="binomial") -> Moments:
    model = ModelKind.parse(model)
    p = np.asarray(p, dtype=float)[A:]
    q = np.asarray(q, dtype=float)[A:]
    if p.size == 0:
        return Moments(0.0, 0.0, 0.0)
    mean = math.fsum(q - p)
    upper = math.fsum(q) / n
    if model is ModelKind.POISSON:
        exact = upper
    elif model is ModelKind.BINOMIAL:
        exact = math.fsum(q * (1.0 - q)) / n
    else:
        Q = math.fsum(q)
        exact = Q * (1.0 - Q) / n
    return Moments(mean, upper, exact)
