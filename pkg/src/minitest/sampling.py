"""Random generation under the three models, and the Poissonization
reductions between them.

Samplers take an explicit :class:`numpy.random.Generator`; nothing here keeps
state between calls.  Poisson variates come from numpy's generator
(inversion for small means, PTRS rejection for large ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .model import CanonicalNull, ModelKind, SampleSet, SpecError


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for trial ``trial`` of a run seeded with ``seed``.

    Depends only on the pair, so trials can run in any order or process.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _check_q(model: ModelKind, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or not np.all(np.isfinite(q)) or np.any(q < 0):
        raise SpecError("q must be a finite nonnegative vector")
    if model is ModelKind.BINOMIAL and np.any(q > 1):
        raise SpecError("Binomial q entries must lie in [0, 1]")
    if model is ModelKind.MULTINOMIAL and abs(math.fsum(q) - 1.0) > 1e-9:
        raise SpecError("Multinomial q must sum to 1")
    return q


def sample_observations(model_kind, q, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw observations: ``(n, N)`` rows for Binomial/Poisson, ``(n,)`` categories for Multinomial."""
    model = ModelKind.parse(model_kind)
    q = _check_q(model, q)
    if model is ModelKind.BINOMIAL:
        return (rng.random((n, q.size)) < q).astype(np.int64)
    if model is ModelKind.POISSON:
        return rng.poisson(q, size=(n, q.size)).astype(np.int64)
    return rng.choice(q.size, size=n, p=q / q.sum()).astype(np.int64)


def _draw_counts(model: ModelKind, q: np.ndarray, m: int, rng) -> np.ndarray:
    """Per-coordinate totals of ``m`` observations."""
    if m == 0:
        return np.zeros(q.size, dtype=np.int64)
    if model is ModelKind.BINOMIAL:
        return rng.binomial(m, q)
    if model is ModelKind.POISSON:
        return rng.poisson(m * q)
    return rng.multinomial(m, q / q.sum())


def sample_null_or_alt(model_kind, q, n: int, rng: np.random.Generator,
                       canon: Optional[CanonicalNull] = None) -> SampleSet:
    """Draw ``n`` observations from ``q`` and return their SampleSet.

    Draws the half-sample totals directly, which has the same law as
    counting ``n`` individual rows.  ``q`` is in original coordinates; with
    ``canon`` the result is mapped to its canonical order (Binomial flips
    included).
    """
    model = ModelKind.parse(model_kind)
    q = _check_q(model, q)
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = n // 2
    S = _draw_counts(model, q, k, rng)
    Sp = _draw_counts(model, q, k, rng)
    hist = S + Sp
    if n % 2:
        hist = hist + _draw_counts(model, q, 1, rng)
    if canon is None:
        return SampleSet(n=n, histogram=hist, S=S, S_prime=Sp)
    if canon.p_sorted.size != q.size:
        raise SpecError("q and the null have different dimensions")
    flip = canon.flip_mask
    if flip.any():
        hist = np.where(flip, n - hist, hist)
        S = np.where(flip, k - S, S)
        Sp = np.where(flip, k - Sp, Sp)
    perm = canon.perm
    return SampleSet(n=n, histogram=hist[perm], S=S[perm], S_prime=Sp[perm])


def poissonize_multinomial(q, n: float, rng: np.random.Generator) -> np.ndarray:
    """Histogram of ``Poi(n)`` multinomial draws; coordinate j is ``Poi(n q_j)``."""
    q = _check_q(ModelKind.MULTINOMIAL, q)
    m = int(rng.poisson(n)) if n > 0 else 0
    return rng.multinomial(m, q / q.sum()) if m else np.zeros(q.size, dtype=np.int64)


def poissonize_binomial(p, n: float, rng: np.random.Generator) -> np.ndarray:
    """Sum of ``Poi(n)`` Bernoulli vectors; coordinate j is marginally ``Poi(n p_j)``.

    The coordinates share the row count, so they are not independent:
    ``Cov(H_i, H_j) = n p_i p_j``.
    """
    p = _check_q(ModelKind.BINOMIAL, p)
    m = int(rng.poisson(n)) if n > 0 else 0
    return rng.binomial(m, p) if m else np.zeros(p.size, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Conversion:
    """Outcome of a model conversion; ``rows`` is None when ``ok`` is False."""

    ok: bool
    n_tilde: int
    rows: Optional[np.ndarray]
    reason: Optional[str] = None


def poisson_to_bernoulli_stream(Y, n: int, c: float, rng: np.random.Generator) -> Conversion:
    """Spread Poisson totals over ``Poi(n)`` Bernoulli rows, keep ``floor(c n)``.

    ``Y`` holds Poisson counts, either per-coordinate totals or ``(n, N)``
    rows (summed).  Each coordinate's total is placed on distinct rows chosen
    uniformly.  Fails when fewer than ``floor(c n)`` rows are drawn, or when
    a total exceeds the number of rows.
    """
    Y = np.asarray(Y, dtype=np.int64)
    if Y.ndim == 2:
        Y = Y.sum(axis=0)
    if np.any(Y < 0):
        raise SpecError("Poisson counts must be nonnegative")
    m = int(rng.poisson(n)) if n > 0 else 0
    keep = int(math.floor(c * n))
    if m < keep:
        return Conversion(False, m, None, "A1: fewer rows than floor(c n)")
    if np.any(Y > m):
        return Conversion(False, m, None, "count exceeds the number of Bernoulli rows")
    X = np.zeros((m, Y.size), dtype=np.int64)
    for j, y in enumerate(Y):
        if y:
            X[rng.choice(m, size=int(y), replace=False), j] = 1
    return Conversion(True, m, X[:keep])


def binomial_to_poisson_subsample(X, n: int, c_bar: float, rng: np.random.Generator) -> Conversion:
    """Sum the first ``Poi(floor(c_bar n))`` Bernoulli rows.

    Coordinate j of the result is ``Poi(floor(c_bar n) q_j)``.  Fails when
    more rows are requested than ``n`` available.
    """
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] < n:
        raise SpecError("need at least n observation rows")
    lam = int(math.floor(c_bar * n))
    m = int(rng.poisson(lam)) if lam > 0 else 0
    if m > n:
        return Conversion(False, m, None, "A2: more rows requested than observed")
    return Conversion(True, m, X[:m].sum(axis=0)[None, :])


def solve_c(n: int, eta: float) -> float:
    """Largest ``c`` with ``P(Poi(n) < floor(c n)) <= eta/4`` (``c <= 1``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    budget = eta / 4.0
    # P(Poi(n) < m) = cdf(m - 1); nondecreasing in m
    m_hi = n
    ms = np.arange(0, m_hi + 1)
    ok = stats.poisson.cdf(ms - 1, n) <= budget
    m = int(ms[ok][-1])
    return m / n


def solve_c_bar(n: int, eta: float) -> float:
    """Largest ``c_bar <= 1`` with ``P(Poi(floor(c_bar n)) > n) <= eta/4``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    budget = eta / 4.0
    lams = np.arange(0, n + 1)
    ok = stats.poisson.sf(n, lams) <= budget
    lam = int(lams[ok][-1])
    return lam / n
