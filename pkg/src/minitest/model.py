"""Domain types shared by the whole package.

The null distribution is always handled in *canonical* form: Binomial
coordinates above 1/2 are flipped to ``1 - p_j`` and the vector is sorted in
nonincreasing order (stable, so ties keep their original order).  Every
statistic, index and prior is computed on the canonical vector; the
:class:`CanonicalNull` carries what is needed to map back.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Optional, Sequence

import numpy as np

SUM_TOL = 1e-12


class SpecError(ValueError):
    """A null specification or a data set violates a model invariant."""


class ModelKind(str, enum.Enum):
    BINOMIAL = "binomial"
    POISSON = "poisson"
    MULTINOMIAL = "multinomial"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise SpecError(
                f"unknown model {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ConstantLedger:
    """Every tuning constant used by the tests, indices and priors.

    ``uc`` is the threshold multiplier, ``c_A4`` the fourth power of the
    bulk-index constant, ``c_u`` the tail-prior constant.  ``c_I`` and
    ``c_gamma`` are only required to be "small enough"; see
    :meth:`defaults` for the values pinned here.
    """

    uc: float
    c_I: float
    c_A4: float
    c_u: float
    c_gamma: float
    C_eta_frob: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise SpecError(f"constant {f.name} must be a positive finite real, got {v!r}")
        if self.c_I > self.c_u:
            raise SpecError(f"c_I ({self.c_I}) must not exceed c_u ({self.c_u})")

    @classmethod
    def defaults(cls, eta: float, **overrides) -> "ConstantLedger":
        if not 0.0 < eta < 1.0:
            raise SpecError(f"eta must lie in (0, 1), got {eta}")
        c_A4 = math.log1p(4.0 * (1.0 - eta) ** 2)
        c_u = min(eta / 10.0, (1.0 - eta) ** 2 / 2.0)
        values = dict(
            uc=4.0 / math.sqrt(eta),
            c_I=c_u / 2.0,
            c_A4=c_A4,
            c_u=c_u,
            # Rademacher budget sum(gamma^4 / p^2) = c_gamma^4 / n^2 must stay
            # below c_A4 / (2 n^2) for the chi-square certificate to hold.
            c_gamma=(c_A4 / 2.0) ** 0.25,
            C_eta_frob=min(2.0 / math.sqrt(eta), 0.25),
        )
        unknown = set(overrides) - set(values)
        if unknown:
            raise SpecError(f"unknown constant(s): {sorted(unknown)}")
        values.update({k: float(v) for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def c_A(self) -> float:
        return self.c_A4 ** 0.25

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class NullSpec:
    """The known null vector ``p`` together with its model and tuning."""

    model_kind: ModelKind
    p: np.ndarray
    eta: float = 0.1
    t: float = 1.0
    constants: Optional[ConstantLedger] = None

    def __post_init__(self):
        object.__setattr__(self, "model_kind", ModelKind.parse(self.model_kind))
        try:
            p = np.asarray(self.p, dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"p must be a sequence of reals: {exc}") from None
        if p.ndim != 1 or p.size < 1:
            raise SpecError("p must be a nonempty one-dimensional sequence")
        if not np.all(np.isfinite(p)):
            raise SpecError("p contains NaN or infinite entries")
        if np.any(p < 0):
            raise SpecError("p contains negative entries")
        kind = self.model_kind
        if kind is ModelKind.BINOMIAL and np.any(p > 1):
            raise SpecError("Binomial p entries must lie in [0, 1]")
        if kind is ModelKind.MULTINOMIAL:
            if p.size < 2:
                raise SpecError("Multinomial null needs at least two categories")
            if abs(math.fsum(p) - 1.0) > SUM_TOL:
                raise SpecError(f"Multinomial p must sum to 1 within {SUM_TOL}, sums to {math.fsum(p)!r}")
        if not 0.0 < self.eta < 1.0:
            raise SpecError(f"eta must lie in (0, 1), got {self.eta}")
        if not 1.0 <= self.t <= 2.0:
            raise SpecError(f"t must lie in [1, 2], got {self.t}")
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "t", float(self.t))
        if self.constants is None:
            object.__setattr__(self, "constants", ConstantLedger.defaults(self.eta))

    @property
    def N(self) -> int:
        return int(self.p.size)

    def with_p(self, p) -> "NullSpec":
        return replace(self, p=p)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NullSpec":
        if "p" not in d:
            raise SpecError("spec is missing 'p'")
        eta = float(d.get("eta", 0.1))
        overrides = d.get("constants") or {}
        if not isinstance(overrides, Mapping):
            raise SpecError("'constants' must be an object")
        return cls(
            model_kind=d.get("model", "binomial"),
            p=d["p"],
            eta=eta,
            t=float(d.get("t", 1.0)),
            constants=ConstantLedger.defaults(eta, **overrides),
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model_kind.value,
            "p": self.p.tolist(),
            "eta": self.eta,
            "t": self.t,
            "constants": self.constants.to_dict(),
        }


def load_spec(path) -> NullSpec:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return NullSpec.from_dict(d)


@dataclass(frozen=True, eq=False)
class CanonicalNull:
    """Flipped-and-sorted view of a :class:`NullSpec`.

    ``perm[k]`` is the original index of the k-th canonical coordinate and
    ``flip_mask`` is indexed by *original* coordinate.  For the multinomial
    model the largest category carries no information; statistics and
    indices use :attr:`work`, which drops it.
    """

    spec: NullSpec
    p_sorted: np.ndarray
    perm: np.ndarray
    flip_mask: np.ndarray

    @property
    def model_kind(self) -> ModelKind:
        return self.spec.model_kind

    @property
    def offset(self) -> int:
        return 1 if self.model_kind is ModelKind.MULTINOMIAL else 0

    @property
    def work(self) -> np.ndarray:
        return self.p_sorted[self.offset:]

    def to_canonical(self, values) -> np.ndarray:
        """Map a vector in original coordinates to canonical order, flipping."""
        v = np.asarray(values, dtype=float)
        if v.shape[-1] != self.p_sorted.size:
            raise SpecError(f"expected {self.p_sorted.size} coordinates, got {v.shape[-1]}")
        v = np.where(self.flip_mask, 1.0 - v, v)
        return v[..., self.perm]

    def invert(self, values=None) -> np.ndarray:
        """Map a canonical vector back to original coordinates (default: p)."""
        v = self.p_sorted if values is None else np.asarray(values, dtype=float)
        out = np.empty_like(v)
        out[..., self.perm] = v
        return np.where(self.flip_mask, 1.0 - out, out)


def canonicalize(spec: NullSpec) -> CanonicalNull:
    p = spec.p
    if spec.model_kind is ModelKind.BINOMIAL:
        flip = p > 0.5
        work = np.where(flip, 1.0 - p, p)
    else:
        flip = np.zeros(p.size, dtype=bool)
        work = p.copy()
    perm = np.argsort(-work, kind="stable")
    return CanonicalNull(
        spec=spec,
        p_sorted=_readonly(work[perm]),
        perm=_readonly(perm, dtype=np.intp),
        flip_mask=_readonly(flip, dtype=bool),
    )


@dataclass(frozen=True, eq=False)
class Histogram:
    """Per-coordinate totals over ``n`` observations, without row order."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "counts", _readonly(self.counts, dtype=np.int64))
        if self.n < 0:
            raise SpecError("n must be nonnegative")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Sufficient statistics of ``n`` observations, in canonical order.

    ``S`` counts the first ``k = n // 2`` observations and ``S_prime`` the
    next ``k``; with odd ``n`` the last observation only enters
    ``histogram``.
    """

    n: int
    histogram: np.ndarray
    S: np.ndarray
    S_prime: np.ndarray

    def __post_init__(self):
        for name in ("histogram", "S", "S_prime"):
            object.__setattr__(self, name, _readonly(getattr(self, name), dtype=np.int64))
        if not (self.histogram.shape == self.S.shape == self.S_prime.shape):
            raise SpecError("histogram, S and S_prime must have the same length")
        if self.n < 0:
            raise SpecError("n must be nonnegative")

    @property
    def k(self) -> int:
        return self.n // 2

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.histogram, other.histogram)
            and np.array_equal(self.S, other.S)
            and np.array_equal(self.S_prime, other.S_prime)
        )

    __hash__ = None


@dataclass(frozen=True)
class IndexProfile:
    """Exponents and cut indices for one ``(p, t, n)``.

    Indices are prefix lengths on the working vector: the bulk is the first
    ``A`` coordinates, ``p_{>I}`` is everything after the first ``I``.  ``U``
    is 1-based (the tail prior perturbs coordinates ``U, U+1, ...``) or
    ``None`` when no index qualifies.
    """

    r: float
    b: float
    I: int
    A: int
    U: Optional[int]
    N: int
    n: int

    def __post_init__(self):
        if not 0 <= self.A <= self.I <= self.N:
            raise SpecError(f"index invariant 0 <= A <= I <= N violated: A={self.A} I={self.I} N={self.N}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RateBreakdown:
    bulk_term: float
    tail_term: float
    inv_n_term: float

    @property
    def total(self) -> float:
        return self.bulk_term + self.tail_term + self.inv_n_term

    def to_dict(self) -> dict:
        return {
            "bulk_term": self.bulk_term,
            "tail_term": self.tail_term,
            "inv_n_term": self.inv_n_term,
            "total": self.total,
        }


@dataclass(frozen=True)
class TestVerdict:
    t_bulk: float
    t1: float
    collision_found: bool
    thr_bulk: float
    thr_t1: float
    decide_bulk: bool
    decide_t1: bool
    decide_psi2: bool
    profile: IndexProfile
    t2: Optional[float] = None
    thr_t2: Optional[float] = None
    decide_t2: bool = False
    reason: Optional[str] = None

    __test__ = False  # not a pytest class

    @property
    def decide_aggregate(self) -> bool:
        return bool(self.decide_bulk or self.decide_t1 or self.decide_psi2 or self.decide_t2
                    or self.reason is not None)

    def to_dict(self) -> dict:
        d = {
            "t_bulk": self.t_bulk,
            "t1": self.t1,
            "collision_found": self.collision_found,
            "thr_bulk": self.thr_bulk,
            "thr_t1": self.thr_t1,
            "decide_bulk": self.decide_bulk,
            "decide_t1": self.decide_t1,
            "decide_psi2": self.decide_psi2,
            "decide_aggregate": self.decide_aggregate,
            "reason": self.reason,
            "profile": self.profile.to_dict(),
        }
        if self.t2 is not None:
            d.update(t2=self.t2, thr_t2=self.thr_t2, decide_t2=self.decide_t2)
        return d


class PriorKind(str, enum.Enum):
    BULK = "bulk"
    TAIL = "tail"
    SINGLE = "single"


@dataclass(frozen=True, eq=False)
class AdversarialDraw:
    """One alternative ``q`` (original coordinates) drawn from a prior."""

    q: np.ndarray
    prior_kind: PriorKind
    realized_separation: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "q", _readonly(self.q))

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "prior_kind": self.prior_kind.value,
            "realized_separation": self.realized_separation,
            **self.meta,
        }


# ---------------------------------------------------------------- ingestion


def _check_rows(raw: np.ndarray, spec: NullSpec) -> np.ndarray:
    kind = spec.model_kind
    X = np.asarray(raw)
    if kind is ModelKind.MULTINOMIAL:
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise SpecError("Multinomial observations must be a 1-D sequence of category indices")
        if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
            raise SpecError("category indices must be integers")
        X = X.astype(np.int64)
        if X.size and (X.min() < 0 or X.max() >= spec.N):
            raise SpecError(f"category index out of range [0, {spec.N})")
        return X
    if X.ndim == 1 and spec.N == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise SpecError("observations must be a 2-D array (one row per observation)")
    if X.shape[1] != spec.N:
        raise SpecError(f"dimension mismatch: observations have {X.shape[1]} columns, spec has N={spec.N}")
    if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
        raise SpecError("observations must be integers")
    X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise SpecError("observations must be nonnegative")
    if kind is ModelKind.BINOMIAL and X.size and X.max() > 1:
        raise SpecError("Binomial observations must be 0/1")
    return X


def ingest_samples(raw, spec, rng: Optional[np.random.Generator] = None) -> SampleSet:
    """Reduce raw observations (or a :class:`Histogram`) to a SampleSet.

    ``spec`` is a :class:`NullSpec` or an existing :class:`CanonicalNull`.
    Row data keep their order: the first ``k`` rows feed ``S`` and the next
    ``k`` feed ``S_prime``.  A bare histogram has no row order, so the split
    is drawn from its exact conditional law given the totals using ``rng``.
    """
    canon = spec if isinstance(spec, CanonicalNull) else canonicalize(spec)
    spec = canon.spec
    if isinstance(raw, Histogram):
        return _ingest_histogram(raw, canon, rng)
    X = _check_rows(raw, spec)
    n = int(X.shape[0])
    k = n // 2
    N = spec.N
    if spec.model_kind is ModelKind.MULTINOMIAL:
        hist = np.bincount(X, minlength=N)
        S = np.bincount(X[:k], minlength=N)
        Sp = np.bincount(X[k:2 * k], minlength=N)
    else:
        hist = X.sum(axis=0)
        S = X[:k].sum(axis=0)
        Sp = X[k:2 * k].sum(axis=0)
    return _to_canonical_counts(canon, n, hist, S, Sp)


def _to_canonical_counts(canon: CanonicalNull, n, hist, S, Sp) -> SampleSet:
    k = n // 2
    flip = canon.flip_mask
    if flip.any():
        hist = np.where(flip, n - hist, hist)
        S = np.where(flip, k - S, S)
        Sp = np.where(flip, k - Sp, Sp)
    perm = canon.perm
    return SampleSet(n=n, histogram=hist[perm], S=S[perm], S_prime=Sp[perm])


def _ingest_histogram(h: Histogram, canon: CanonicalNull, rng) -> SampleSet:
    spec = canon.spec
    counts = np.asarray(h.counts, dtype=np.int64)
    if counts.shape != (spec.N,):
        raise SpecError(f"dimension mismatch: histogram has {counts.size} entries, spec has N={spec.N}")
    if np.any(counts < 0):
        raise SpecError("histogram counts must be nonnegative")
    n = int(h.n)
    kind = spec.model_kind
    if kind is ModelKind.MULTINOMIAL and counts.sum() != n:
        raise SpecError(f"multinomial histogram sums to {counts.sum()}, expected n={n}")
    if kind is ModelKind.BINOMIAL and np.any(counts > n):
        raise SpecError("Binomial histogram count exceeds n")
    if rng is None:
        rng = np.random.default_rng()
    k = n // 2
    if kind is ModelKind.MULTINOMIAL:
        S = rng.multivariate_hypergeometric(counts, k)
        Sp = rng.multivariate_hypergeometric(counts - S, k)
    elif kind is ModelKind.BINOMIAL:
        S = _hypergeom(rng, counts, n, k)
        Sp = _hypergeom(rng, counts - S, n - k, k)
    else:
        # given the total, each unit falls in any of the n observations uniformly
        S = rng.binomial(counts, k / n) if n else np.zeros_like(counts)
        rest = counts - S
        Sp = rng.binomial(rest, k / (n - k)) if n - k else np.zeros_like(counts)
    return _to_canonical_counts(canon, n, counts, S, Sp)


def _hypergeom(rng, good, total, draws):
    good = np.asarray(good, dtype=np.int64)
    if draws == 0:
        return np.zeros_like(good)
    return rng.hypergeometric(good, total - good, draws)


def read_samples_csv(path, spec: NullSpec, n: Optional[int] = None):
    """Parse the CSV sample format.

    Either one observation per row, or a single row ``H,c_1,...,c_N``
    holding a histogram.  ``n`` is required for a Binomial/Poisson histogram
    (a multinomial histogram defaults to the sum of its counts).
    """
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([c.strip() for c in line.split(",")])
    if rows and rows[0] and rows[0][0].upper() == "H":
        if len(rows) != 1:
            raise SpecError("a histogram file must contain exactly one 'H' row")
        try:
            counts = np.array([int(c) for c in rows[0][1:]], dtype=np.int64)
        except ValueError:
            raise SpecError("histogram counts must be integers") from None
        if n is None:
            if spec.model_kind is not ModelKind.MULTINOMIAL:
                raise SpecError("histogram input needs the sample size n for this model")
            n = int(counts.sum())
        return Histogram(counts=counts, n=int(n))
    try:
        data = [[float(c) for c in r] for r in rows]
    except ValueError:
        raise SpecError("observation rows must be numeric") from None
    widths = {len(r) for r in data}
    if len(widths) > 1:
        raise SpecError("ragged observation rows")
    if spec.model_kind is ModelKind.MULTINOMIAL:
        return np.array([r[0] for r in data]) if data else np.zeros(0)
    return np.array(data) if data else np.zeros((0, spec.N))


def write_samples_csv(path_or_fh, observations, model_kind: ModelKind):
    X = np.asarray(observations)
    lines = []
    if ModelKind.parse(model_kind) is ModelKind.MULTINOMIAL:
        lines = [str(int(x)) for x in X.ravel()]
    else:
        lines = [",".join(str(int(v)) for v in row) for row in X]
    text = "\n".join(lines) + ("\n" if lines else "")
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        with open(path_or_fh, "w") as fh:
            fh.write(text)
