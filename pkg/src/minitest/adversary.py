"""Alternatives from the lower-bound constructions.

Three priors: Rademacher perturbations of the bulk, a sparse prior on the
tail that matches the null's first moment, and a single-coordinate shift of
size (1 - eta)/n.  Every draw returns ``q`` in the caller's original
coordinates.

``scale`` stretches the perturbation: the returned alternative is
``clip(p + scale * (q_1 - p))`` where ``q_1`` is the draw at scale 1.  So
scale multiplies ``gamma`` for the bulk prior and the excess mass of the
tail prior, and ``scale = 0`` returns ``p`` itself.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .model import (
    AdversarialDraw,
    CanonicalNull,
    IndexProfile,
    ModelKind,
    PriorKind,
    SpecError,
    canonicalize,
)
from .rates import exponents, index_profile


class PriorUndefined(SpecError):
    """The requested prior does not exist for this null and sample size."""


def lt_distance(p, q, t: float) -> float:
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    s = math.fsum(d ** t)
    return s ** (1.0 / t) if s > 0 else 0.0


def _canon(spec_or_canon) -> CanonicalNull:
    return spec_or_canon if isinstance(spec_or_canon, CanonicalNull) else canonicalize(spec_or_canon)


def _finish(canon: CanonicalNull, q_work: np.ndarray, kind: PriorKind, meta: dict) -> AdversarialDraw:
    """Embed a perturbed working vector into a valid alternative and map back."""
    if np.array_equal(q_work, canon.work):
        q_orig = np.asarray(canon.spec.p, dtype=float).copy()
        return AdversarialDraw(q=q_orig, prior_kind=kind, realized_separation=0.0, meta=meta)
    q = canon.p_sorted.astype(float).copy()
    o = canon.offset
    q[o:] = np.maximum(q_work, 0.0)
    model = canon.model_kind
    if model is ModelKind.BINOMIAL:
        q = np.minimum(q, 1.0)
    elif model is ModelKind.MULTINOMIAL:
        # the largest category stays put; the simplex constraint is restored
        # by normalizing
        q = q / math.fsum(q)
    q_orig = canon.invert(q)
    if model is ModelKind.BINOMIAL:
        q_orig = np.clip(q_orig, 0.0, 1.0)
    sep = lt_distance(canon.spec.p, q_orig, canon.spec.t)
    return AdversarialDraw(q=q_orig, prior_kind=kind, realized_separation=sep, meta=meta)


def bulk_gamma(p_work, profile: IndexProfile, n: int, c_gamma: float, t: float) -> np.ndarray:
    """``gamma_i = c_gamma p_i^{2/(4-t)} / (sqrt(n) (sum_{i<=I} p_i^r)^{1/4})`` for i <= A."""
    p = np.asarray(p_work, dtype=float)
    A, I = profile.A, profile.I
    if A < 1:
        raise PriorUndefined("empty bulk (A = 0): the bulk prior does not exist")
    mass = math.fsum(p[:I] ** profile.r)
    return c_gamma * p[:A] ** (2.0 / (4.0 - t)) / (math.sqrt(n) * mass ** 0.25)


def bulk_prior_draw(spec_or_canon, n: int, rng: Optional[np.random.Generator] = None, *,
                    profile: Optional[IndexProfile] = None, c_gamma: Optional[float] = None,
                    scale: float = 1.0, signs=None) -> AdversarialDraw:
    """``q_i = p_i + delta_i gamma_i`` on the bulk, ``delta_i`` iid uniform signs.

    ``signs`` fixes the signs (length A) instead of drawing them.
    """
    canon = _canon(spec_or_canon)
    spec = canon.spec
    p = canon.work
    if profile is None:
        profile = index_profile(p, n, spec.t, spec.constants)
    if c_gamma is None:
        c_gamma = spec.constants.c_gamma
    gamma = bulk_gamma(p, profile, n, c_gamma, spec.t)
    A = profile.A
    if c_gamma <= spec.constants.c_A and np.any(gamma > p[:A] * (1.0 + 1e-12)):
        raise AssertionError("bulk perturbation exceeds p_i inside the bulk")
    if signs is None:
        if rng is None:
            raise ValueError("rng is required when signs are not given")
        delta = rng.choice(np.array([-1.0, 1.0]), size=A)
    else:
        delta = np.asarray(signs, dtype=float)
        if delta.shape != (A,) or not np.all(np.abs(delta) == 1.0):
            raise ValueError(f"signs must be a vector of {A} entries in {{-1, +1}}")
    q_work = p.astype(float).copy()
    q_work[:A] += scale * delta * gamma
    meta = {"A": A, "I": profile.I, "scale": scale, "gamma_norm_t": lt_distance(gamma, 0, spec.t) * scale}
    return _finish(canon, q_work, PriorKind.BULK, meta)


def tail_pi_bar(p_work, U: int, n: int, c_u: float) -> float:
    mass = math.fsum(np.asarray(p_work, dtype=float)[U - 1:])
    if mass <= 0:
        raise PriorUndefined("zero tail mass beyond U: the tail prior does not exist")
    return c_u / (n * n * mass)


def tail_prior_draw(spec_or_canon, n: int, rng: np.random.Generator, *,
                    profile: Optional[IndexProfile] = None, c_u: Optional[float] = None,
                    scale: float = 1.0) -> AdversarialDraw:
    """``q_i = b_i pi_bar`` with ``b_i ~ Ber(p_i / pi_bar)`` for ``i >= U``; ``q_i = p_i`` before."""
    canon = _canon(spec_or_canon)
    spec = canon.spec
    p = canon.work
    if profile is None:
        profile = index_profile(p, n, spec.t, spec.constants)
    if c_u is None:
        c_u = spec.constants.c_u
    U = profile.U
    if U is None:
        raise PriorUndefined("no index U qualifies: the tail prior does not exist")
    pi_bar = tail_pi_bar(p, U, n, c_u)
    tail = p[U - 1:]
    pi = tail / pi_bar
    if np.any(pi > 1.0 + 1e-9):
        raise AssertionError("tail prior Bernoulli parameter exceeds 1")
    pi = np.minimum(pi, 1.0)
    b = rng.random(tail.size) < pi
    q1 = np.where(b, pi_bar, 0.0)
    q_work = p.astype(float).copy()
    q_work[U - 1:] = tail + scale * (q1 - tail)
    meta = {"U": U, "pi_bar": pi_bar, "active": int(b.sum()), "scale": scale}
    return _finish(canon, q_work, PriorKind.TAIL, meta)


def single_coordinate_draw(spec_or_canon, n: int, eta: Optional[float] = None, *,
                           scale: float = 1.0) -> AdversarialDraw:
    """Shift the largest working coordinate up by ``scale (1 - eta) / n``."""
    canon = _canon(spec_or_canon)
    spec = canon.spec
    if eta is None:
        eta = spec.eta
    shift = scale * (1.0 - eta) / n
    p = canon.work
    if spec.model_kind is ModelKind.BINOMIAL and p[0] + shift > 1.0:
        raise PriorUndefined("p_1 + (1 - eta)/n exceeds 1")
    q_work = p.astype(float).copy()
    q_work[0] += shift
    if spec.model_kind is ModelKind.MULTINOMIAL:
        # take the mass from the (unperturbed otherwise) largest category
        top = canon.p_sorted[0]
        if top < shift:
            raise PriorUndefined("largest category cannot absorb the shift")
        q = canon.p_sorted.astype(float).copy()
        q[0] -= shift
        q[1:] = q_work
        q_orig = canon.invert(q)
        return AdversarialDraw(q=q_orig, prior_kind=PriorKind.SINGLE,
                               realized_separation=lt_distance(spec.p, q_orig, spec.t),
                               meta={"shift": shift, "scale": scale})
    return _finish(canon, q_work, PriorKind.SINGLE, {"shift": shift, "scale": scale})


def draw(kind, spec_or_canon, n: int, rng: np.random.Generator, scale: float = 1.0,
         profile: Optional[IndexProfile] = None) -> AdversarialDraw:
    kind = PriorKind(kind)
    if kind is PriorKind.BULK:
        return bulk_prior_draw(spec_or_canon, n, rng, profile=profile, scale=scale)
    if kind is PriorKind.TAIL:
        return tail_prior_draw(spec_or_canon, n, rng, profile=profile, scale=scale)
    return single_coordinate_draw(spec_or_canon, n, scale=scale)


def feasibility_check(p, gamma, n: int, budget: float) -> bool:
    """``sum gamma_i^4 / p_i^2 <= budget / n^2``; a zero ``p_i`` needs ``gamma_i = 0``."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if p.shape != g.shape:
        raise ValueError("p and gamma must have the same shape")
    zero = p == 0
    if np.any(g[zero] != 0):
        return False
    pz = p[~zero]
    gz = g[~zero]
    total = math.fsum(gz ** 4 / pz ** 2)
    return total <= budget / float(n) ** 2 * (1.0 + 1e-12)


def holder_saturating_gamma(p_bulk, n: int, budget: float, t: float, clamp: bool = True) -> np.ndarray:
    """The ``gamma`` maximizing ``sum gamma^t`` under ``sum gamma^4/p^2 <= budget/n^2``.

    Proportional to ``p^{2/(4-t)}``, scaled to meet the budget exactly, then
    clamped into ``[0, p_i]``.
    """
    p = np.asarray(p_bulk, dtype=float)
    if np.any(p < 0):
        raise ValueError("p must be nonnegative")
    r, _ = exponents(t)
    mass = math.fsum(p ** r)
    if mass == 0:
        return np.zeros_like(p)
    lam = (budget / (float(n) ** 2 * mass)) ** 0.25
    g = lam * p ** (2.0 / (4.0 - t))
    return np.clip(g, 0.0, p) if clamp else g


def chi2_divergence_closed_form(p, gamma, n: int) -> float:
    """chi-square divergence between the Rademacher mixture and the null.

    ``prod_i [ (1+x_i)^n/2 + (1-x_i)^n/2 ] - 1`` with
    ``x_i = gamma_i^2 / (p_i (1 - p_i))``, accumulated in log-space.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if np.any((p <= 0) | (p >= 1)) and np.any(g[(p <= 0) | (p >= 1)] != 0):
        raise ValueError("perturbing a coordinate with p in {0, 1}")
    live = g != 0
    p, g = p[live], g[live]
    if p.size == 0:
        return 0.0
    x = g * g / (p * (1.0 - p))
    ratio = (1.0 - x) / (1.0 + x)
    logs = n * np.log1p(x) + np.log1p(ratio ** n) - math.log(2.0)
    return math.expm1(math.fsum(logs))


def chi2_cosh_bound(p, gamma, n: int) -> float:
    """``exp(sum n^2 gamma^4 / (2 p^2 (1-p)^2))``: upper bound on 1 + chi-square."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(gamma, dtype=float)
    live = g != 0
    p, g = p[live], g[live]
    if p.size == 0:
        return 1.0
    return math.exp(math.fsum(n * n * g ** 4 / (2.0 * p ** 2 * (1.0 - p) ** 2)))
