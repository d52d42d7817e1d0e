"""Exact small-instance computations by brute-force enumeration.

These are reference values for the closed forms elsewhere in the package,
so they deliberately share no code with them: every pmf is evaluated here
from log-gamma, and every expectation is a compensated sum over an
explicitly enumerated outcome space.  Sizes are capped; exceeding a cap
raises :class:`OracleTooLarge`.
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .model import ModelKind

MAX_OUTCOMES = 20_000
POISSON_TAIL = 1e-20


class OracleTooLarge(ValueError):
    pass


def exact_pmf(kind, params, k) -> float:
    """pmf of ``Binomial(n, p)`` (``params=(n, p)``) or ``Poisson(lam)`` (``params=(lam,)``) at ``k``."""
    return float(_pmf_vec(kind, params, np.atleast_1d(k))[0])


def _pmf_vec(kind, params, ks) -> np.ndarray:
    kind = str(kind).lower()
    ks = np.asarray(ks, dtype=float)
    out = np.zeros(ks.shape)
    if kind == "binomial":
        n, p = params
        valid = (ks >= 0) & (ks <= n)
        if p == 0.0:
            return np.where(ks == 0, 1.0, 0.0)
        if p == 1.0:
            return np.where(ks == n, 1.0, 0.0)
        kv = ks[valid]
        logc = gammaln(n + 1) - gammaln(kv + 1) - gammaln(n - kv + 1)
        out[valid] = np.exp(logc + kv * math.log(p) + (n - kv) * math.log1p(-p))
        return out
    if kind == "poisson":
        (lam,) = params
        if lam == 0.0:
            return np.where(ks == 0, 1.0, 0.0)
        valid = ks >= 0
        kv = ks[valid]
        out[valid] = np.exp(kv * math.log(lam) - lam - gammaln(kv + 1))
        return out
    raise ValueError(f"unknown pmf kind {kind!r}")


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 1 - prev - 1)
        yield out


def _multinomial_logpmf(x, probs, m) -> float:
    s = gammaln(m + 1)
    for xi, pi in zip(x, probs):
        if xi:
            if pi <= 0:
                return -math.inf
            s += xi * math.log(pi) - gammaln(xi + 1)
    return s


def count_outcomes(q, m: int, model) -> tuple[np.ndarray, np.ndarray]:
    """Joint law of the counts of ``m`` observations on the coordinates of ``q``.

    Returns ``(X, w)``: one outcome per row of ``X`` with probability ``w``.
    For the multinomial model ``q`` lists some categories and the rest of the
    mass ``1 - sum(q)`` goes to an implicit extra category, which is not
    reported.
    """
    model = ModelKind.parse(model)
    q = np.asarray(q, dtype=float)
    N = q.size
    if model is ModelKind.BINOMIAL:
        if (m + 1) ** N > MAX_OUTCOMES:
            raise OracleTooLarge("outcome space too large for enumeration")
        marg = [_pmf_vec("binomial", (m, qi), np.arange(m + 1)) for qi in q]
        X = np.array(list(itertools.product(range(m + 1), repeat=N)), dtype=np.int64).reshape(-1, N)
        w = np.ones(X.shape[0])
        for i in range(N):
            w = w * marg[i][X[:, i]]
        return X, w
    if model is ModelKind.MULTINOMIAL:
        rest = 1.0 - math.fsum(q)
        if rest < -1e-12:
            raise ValueError("multinomial q sums to more than 1")
        probs = list(q) + [max(rest, 0.0)]
        if math.comb(m + N, N) > MAX_OUTCOMES:
            raise OracleTooLarge("outcome space too large for enumeration")
        rows, ws = [], []
        for x in _compositions(m, N + 1):
            lp = _multinomial_logpmf(x, probs, m)
            if lp > -math.inf:
                rows.append(x[:N])
                ws.append(math.exp(lp))
        return np.array(rows, dtype=np.int64).reshape(-1, N), np.array(ws)
    raise ValueError("Poisson counts have unbounded support; use the per-coordinate path")


def _poisson_support(lam: float) -> np.ndarray:
    if lam == 0:
        return np.zeros(1, dtype=np.int64)
    hi = int(lam + 12.0 * math.sqrt(lam) + 40)
    while _pmf_vec("poisson", (lam,), [hi])[0] > POISSON_TAIL:
        hi *= 2
    return np.arange(hi + 1)


def _weighted_stats(T: np.ndarray, W: np.ndarray) -> tuple[float, float]:
    t, w = T.ravel(), W.ravel()
    mean = math.fsum(w * t)
    var = math.fsum(w * (t - mean) ** 2)
    return mean, var


class ExactMoments(NamedTuple):
    mean: float
    variance: float


def enumerate_statistic_moments(p, q, size: int, statistic_kind: str, model="binomial",
                                t: float = 1.0, A: int = 0) -> ExactMoments:
    """Exact mean and variance of a statistic by summing over all outcomes.

    ``statistic_kind`` is ``"t_bulk"`` (split, weighted, bulk = first ``A``
    coordinates), ``"t2"`` (split, unweighted, coordinates after ``A``) or
    ``"t1"`` (histogram tail mass, coordinates after ``A``).  ``size`` is
    ``k`` for the split statistics and ``n`` for ``t1``.  ``p`` and ``q`` are
    working vectors; under the multinomial model the missing mass is an
    extra category.
    """
    model = ModelKind.parse(model)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    if size < 1:
        raise ValueError("size must be >= 1")
    if statistic_kind == "t_bulk":
        coords = np.arange(0, A)
        b = (4.0 - 2.0 * t) / (4.0 - t)
        weights = p[coords] ** (-b)
    elif statistic_kind in ("t2", "t1"):
        coords = np.arange(A, p.size)
        weights = np.ones(coords.size)
    else:
        raise ValueError(f"unknown statistic {statistic_kind!r}")
    if coords.size == 0:
        return ExactMoments(0.0, 0.0)
    pc = p[coords]
    k = size

    if model is ModelKind.POISSON:
        # coordinates are independent: sum per-coordinate moments
        means, variances = [], []
        for i, qi in enumerate(q[coords]):
            xs = _poisson_support(k * qi)
            wx = _pmf_vec("poisson", (k * qi,), xs)
            if statistic_kind == "t1":
                T = xs / k - pc[i]
                m_, v_ = _weighted_stats(T, wx)
            else:
                f = xs / k - pc[i]
                T = weights[i] * np.outer(f, f)
                m_, v_ = _weighted_stats(T, np.outer(wx, wx))
            means.append(m_)
            variances.append(v_)
        return ExactMoments(math.fsum(means), math.fsum(variances))

    # multinomial: coordinates the statistic ignores are lumped into the rest
    X, w = count_outcomes(q[coords], k, model)
    F = X / k - pc
    if statistic_kind == "t1":
        T = F.sum(axis=1)
        return ExactMoments(*_weighted_stats(T, w))
    T = (F * weights) @ F.T
    return ExactMoments(*_weighted_stats(T, np.outer(w, w)))


def exact_mixture_chi2(p, gamma, n: int) -> float:
    """chi-square between the Rademacher mixture and the Binomial null, by enumeration.

    Sums ``(E_delta P_{p + delta gamma}(H))^2 / P_p(H)`` over every histogram
    ``H`` of ``n`` observations and every sign vector ``delta``.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(gamma, dtype=float)
    N = p.size
    if N > 2 or n > 4:
        raise OracleTooLarge("exact_mixture_chi2 is limited to N <= 2, n <= 4")
    ks = np.arange(n + 1)
    signs = list(itertools.product((-1.0, 1.0), repeat=N))
    null_marg = [_pmf_vec("binomial", (n, pi), ks) for pi in p]
    alt_marg = {
        s: [_pmf_vec("binomial", (n, p[i] + s[i] * g[i]), ks) for i in range(N)] for s in signs
    }
    terms = []
    for H in itertools.product(range(n + 1), repeat=N):
        p0 = math.prod(null_marg[i][H[i]] for i in range(N))
        mix = math.fsum(math.prod(alt_marg[s][i][H[i]] for i in range(N)) for s in signs) / len(signs)
        if p0 == 0:
            if mix > 0:
                return math.inf
            continue
        terms.append(mix * mix / p0)
    terms.append(-1.0)
    return math.fsum(terms)


class TailTV(NamedTuple):
    tv: float
    collision_null: float
    collision_alt: float


def exact_tv_tail_prior(p, U: int, pi_bar: float, n: int) -> TailTV:
    """TV between the Binomial null and the sparse-prior mixture on coordinates ``>= U``.

    ``U`` is 1-based.  Coordinates before ``U`` are identical under both
    laws and drop out.  Also returns the probability, under each law, of a
    count of at least two summed over tail coordinates.
    """
    p = np.asarray(p, dtype=float)
    tail = p[U - 1:]
    m = tail.size
    if m > 2 or n > 4:
        raise OracleTooLarge("exact_tv_tail_prior is limited to two tail coordinates and n <= 4")
    if m == 0:
        return TailTV(0.0, 0.0, 0.0)
    ks = np.arange(n + 1)
    pi = np.minimum(tail / pi_bar, 1.0) if pi_bar > 0 else np.zeros(m)
    null_marg = [_pmf_vec("binomial", (n, x), ks) for x in tail]
    on = _pmf_vec("binomial", (n, min(pi_bar, 1.0)), ks)
    off = _pmf_vec("binomial", (n, 0.0), ks)
    # each coordinate's mixture marginal; coordinates are independent a priori
    alt_marg = [pi[i] * on + (1.0 - pi[i]) * off for i in range(m)]
    diffs = []
    for H in itertools.product(range(n + 1), repeat=m):
        a = math.prod(null_marg[i][H[i]] for i in range(m))
        b = math.prod(alt_marg[i][H[i]] for i in range(m))
        diffs.append(abs(a - b))
    tv = 0.5 * math.fsum(diffs)
    coll0 = math.fsum(math.fsum(null_marg[i][2:]) for i in range(m))
    coll1 = math.fsum(math.fsum(alt_marg[i][2:]) for i in range(m))
    return TailTV(tv, coll0, coll1)
