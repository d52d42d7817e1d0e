"""Exponents, cut indices and the local minimax separation radius.

All index functions take the canonical (nonincreasing) working vector.  The
indices are prefix lengths, so ``p[:I]`` is ``p_{<=I}`` and ``p[I:]`` is
``p_{>I}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    CanonicalNull,
    ConstantLedger,
    IndexProfile,
    ModelKind,
    NullSpec,
    RateBreakdown,
    SpecError,
    canonicalize,
)

# Relative slack on "<=" comparisons against sums, so that the cut does not
# depend on summation order at the last ulp.
_REL_SLACK = 1e-12


def exponents(t: float) -> tuple[float, float]:
    """Return ``(r, b) = (2t/(4-t), (4-2t)/(4-t))``."""
    if not 1.0 <= t <= 2.0:
        raise ValueError(f"t must lie in [1, 2], got {t}")
    return 2.0 * t / (4.0 - t), (4.0 - 2.0 * t) / (4.0 - t)


def _as_sorted(p_sorted) -> np.ndarray:
    p = np.asarray(p_sorted, dtype=float)
    if p.ndim != 1:
        raise ValueError("p must be one-dimensional")
    return p


def _tail_sums(x: np.ndarray) -> np.ndarray:
    """``out[J] = sum(x[J:])`` for J = 0..len(x), right-to-left."""
    out = np.zeros(x.size + 1)
    out[:-1] = np.cumsum(x[::-1])[::-1]
    return out


def index_I(p_sorted, n: int, c_I: float) -> int:
    """Smallest ``J`` in ``[0, N]`` with ``sum_{i>J} p_i^2 <= c_I / n^2``."""
    p = _as_sorted(p_sorted)
    if n < 1:
        raise ValueError("n must be >= 1")
    tails = _tail_sums(p * p)
    bound = c_I / float(n) ** 2
    ok = np.nonzero(tails <= bound * (1.0 + _REL_SLACK))[0]
    # tails[N] == 0, so ok is never empty
    return int(ok[0])


def index_A(p_sorted, I: int, n: int, t: float, c_A4: float) -> int:
    """Largest bulk index ``a <= I`` whose perturbation fits inside ``[0, p_a]``.

    Zero coordinates never qualify, whatever ``t``.  Returns 0 for an empty
    bulk.
    """
    p = _as_sorted(p_sorted)
    if I <= 0:
        return 0
    r, b = exponents(t)
    head = p[:I]
    mass = float(np.sum(head ** r))
    if mass <= 0.0:
        return 0
    thr = c_A4 ** 0.25 / (math.sqrt(n) * mass ** 0.25)
    lhs = np.where(head > 0, head ** (b / 2.0), 0.0)
    ok = np.nonzero((head > 0) & (lhs >= thr))[0]
    return int(ok[-1]) + 1 if ok.size else 0


def index_U(p_sorted, I: int, A: int, n: int, c_u: float) -> Optional[int]:
    """Smallest 1-based ``U > I`` with ``n^2 p_U ||p_{>=U}||_1 <= c_u``.

    ``A`` is accepted for signature symmetry; the rule only involves ``I``.
    """
    p = _as_sorted(p_sorted)
    N = p.size
    if I >= N:
        return None
    tails = _tail_sums(p)
    # 0-based j corresponds to U = j + 1 and ||p_{>=U}||_1 = tails[j]
    j = np.arange(I, N)
    prod = float(n) ** 2 * p[j] * tails[j]
    ok = np.nonzero(prod <= c_u * (1.0 + _REL_SLACK))[0]
    return int(j[ok[0]]) + 1 if ok.size else None


def partial_norm(p_sorted, lo: int, hi: int, s: float) -> float:
    """``(sum_{lo < i <= hi} p_i^s)^(1/s)`` with 1-based ``i``; 0 for an empty range."""
    if s <= 0:
        raise ValueError("exponent must be positive")
    p = _as_sorted(p_sorted)
    seg = p[max(lo, 0):max(hi, 0)]
    if seg.size == 0:
        return 0.0
    total = math.fsum(np.abs(seg) ** s)
    return total ** (1.0 / s) if total > 0 else 0.0


def _power_sum(x: np.ndarray, s: float) -> float:
    return math.fsum(x ** s) if x.size else 0.0


def index_profile(p_sorted, n: int, t: float, ledger: ConstantLedger) -> IndexProfile:
    p = _as_sorted(p_sorted)
    r, b = exponents(t)
    I = index_I(p, n, ledger.c_I)
    A = index_A(p, I, n, t, ledger.c_A4)
    U = index_U(p, I, A, n, ledger.c_u)
    return IndexProfile(r=r, b=b, I=I, A=A, U=U, N=int(p.size), n=int(n))


def profile_for(spec_or_canon, n: int) -> IndexProfile:
    canon = spec_or_canon if isinstance(spec_or_canon, CanonicalNull) else canonicalize(spec_or_canon)
    spec = canon.spec
    return index_profile(canon.work, n, spec.t, spec.constants)


def rate_terms(p_sorted, n: int, t: float, ledger: ConstantLedger, tail_form: str = "I") -> RateBreakdown:
    """Bulk, tail and 1/n terms of the local radius for a working vector."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if tail_form not in ("I", "A"):
        raise ValueError("tail_form must be 'I' or 'A'")
    p = _as_sorted(p_sorted)
    prof = index_profile(p, n, t, ledger)
    r = prof.r
    bulk_r = _power_sum(p[:prof.I], r)
    bulk = math.sqrt(bulk_r ** (1.0 / r) / n) if bulk_r > 0 else 0.0
    if t >= 2.0:
        # ||p_{>I}||_1^0 / n is the 1/n term itself
        tail = 0.0
    else:
        cut = prof.I if tail_form == "I" else prof.A
        mass = math.fsum(p[cut:]) if cut < p.size else 0.0
        tail = mass ** ((2.0 - t) / t) / n ** ((2.0 * t - 2.0) / t) if mass > 0 else 0.0
    return RateBreakdown(bulk_term=bulk, tail_term=tail, inv_n_term=1.0 / n)


def minimax_rate(spec, n: int, tail_form: str = "I") -> RateBreakdown:
    """Local minimax separation radius (up to constants) for ``spec`` at ``n``.

    For the multinomial model the largest category is dropped first.
    """
    canon = spec if isinstance(spec, CanonicalNull) else canonicalize(spec)
    s = canon.spec
    return rate_terms(canon.work, n, s.t, s.constants, tail_form=tail_form)


def lower_bound_terms(p_sorted, n: int, t: float, ledger: ConstantLedger) -> RateBreakdown:
    """The rate as produced by the two priors, before replacing A by I.

    Bulk term ``||p_{<=A}||_r^{r/t} / (sqrt(n) ||p_{<=I}||_r^{r/4})``.
    """
    p = _as_sorted(p_sorted)
    prof = index_profile(p, n, t, ledger)
    mass_A = _power_sum(p[:prof.A], prof.r)
    mass_I = _power_sum(p[:prof.I], prof.r)
    bulk = mass_A ** (1.0 / t) / (math.sqrt(n) * mass_I ** 0.25) if mass_A > 0 else 0.0
    upper = rate_terms(p, n, t, ledger)
    return RateBreakdown(bulk_term=bulk, tail_term=upper.tail_term, inv_n_term=1.0 / n)


def frobenius_rate(P, n: int) -> float:
    """``sqrt(||P||/n) + 1/n`` for a symmetric probability matrix.

    ``||P||`` is the Euclidean norm of the strict upper triangle, i.e. the
    matrix Frobenius norm divided by sqrt(2) for a zero diagonal.
    """
    M = np.asarray(P, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("P must be a square matrix")
    if not np.allclose(M, M.T, rtol=0, atol=0):
        raise ValueError("P must be symmetric")
    if np.any((M < 0) | (M > 1)):
        raise ValueError("P entries must lie in [0, 1]")
    v = flatten_upper(M)
    norm = math.sqrt(math.fsum(v * v))
    return math.sqrt(norm / n) + 1.0 / n


def flatten_upper(P) -> np.ndarray:
    M = np.asarray(P, dtype=float)
    iu = np.triu_indices(M.shape[0], k=1)
    return M[iu]


# ----------------------------------------------------------- fixed points


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class FixedPointBounds:
    eps_plus: float
    eps_minus: float
    C: float
    c: float

    @property
    def ratio(self) -> float:
        return self.eps_plus / self.eps_minus

    @property
    def first_case(self) -> bool:
        """``eps_plus <= 16 eps_minus``: the bounds match directly."""
        return self.eps_plus <= 16.0 * self.eps_minus * (1.0 + 1e-10)

    @property
    def bounds_match(self) -> bool:
        return self.eps_plus <= 16.0 * (self.C / self.c) * self.eps_minus * (1.0 + 1e-10)

    def to_dict(self) -> dict:
        return {
            "eps_plus": self.eps_plus,
            "eps_minus": self.eps_minus,
            "ratio": self.ratio,
            "first_case": self.first_case,
            "bounds_match": self.bounds_match,
            "C": self.C,
            "c": self.c,
        }


def truncated_two_thirds_norm(p_sorted, alpha: float) -> float:
    """``||p^{-max}_{-alpha}||_{2/3}``.

    ``J`` is the smallest index with ``sum_{i>J} p_i <= alpha``; the vector
    kept is ``(p_2, ..., p_J)``.
    """
    p = _as_sorted(p_sorted)
    tails = _tail_sums(p)
    J = int(np.nonzero(tails <= alpha)[0][0])
    seg = p[1:J]
    s = math.fsum(seg ** (2.0 / 3.0)) if seg.size else 0.0
    return s ** 1.5


def fixed_point_bounds(p_sorted, n: int, C: float, c: float, rtol: float = 1e-10,
                       max_iter: int = 200) -> FixedPointBounds:
    """Upper/lower fixed points of the 2/3-norm sample-complexity bounds.

    ``eps_plus`` is the largest ``e <= C sqrt(||p_{-e/16}||/n) + C/n`` and
    ``eps_minus`` the smallest ``e >= c sqrt(||p_{-e}||/n) + c/n``.  Both maps
    are nonincreasing step functions of ``e``, so bisection on the sign of
    ``e - f(e)`` converges; a final snap lands exactly on a flat piece.
    """
    p = _as_sorted(p_sorted)
    if not (C >= c > 0):
        raise ValueError("need C >= c > 0")
    if abs(math.fsum(p) - 1.0) > 1e-12 or np.any(np.diff(p) > 0):
        raise ValueError("expects a sorted probability vector")

    def f_plus(e):
        return C * math.sqrt(truncated_two_thirds_norm(p, e / 16.0) / n) + C / n

    def f_minus(e):
        return c * math.sqrt(truncated_two_thirds_norm(p, e) / n) + c / n

    # eps_plus: {e : e <= f_plus(e)} = [0, eps_plus]
    lo, hi = 0.0, f_plus(0.0) * (1.0 + 1e-9) + 1e-300
    if hi <= f_plus(hi):
        raise BracketError("failed to bracket eps_plus")
    lo, hi = _bisect(lambda e: e <= f_plus(e), lo, hi, rtol, max_iter)
    v = f_plus(lo)
    eps_plus = v if lo <= v <= f_plus(v) and v - lo <= 2 * (hi - lo) + 1e-300 else lo

    # eps_minus: {e : e >= f_minus(e)} = [eps_minus, inf)
    lo, hi = 0.0, f_minus(0.0)
    if not hi >= f_minus(hi):
        raise BracketError("failed to bracket eps_minus")
    lo, hi = _bisect(lambda e: not (e >= f_minus(e)), lo, hi, rtol, max_iter)
    v = f_minus(hi)
    eps_minus = v if f_minus(v) <= v <= hi and hi - v <= 2 * (hi - lo) + 1e-300 else hi
    return FixedPointBounds(eps_plus=eps_plus, eps_minus=eps_minus, C=C, c=c)


def _bisect(pred, lo, hi, rtol, max_iter):
    """Shrink ``[lo, hi]`` keeping ``pred(lo)`` true and ``pred(hi)`` false."""
    for _ in range(max_iter):
        if hi - lo <= rtol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi
