"""Locally minimax identity tests for Binomial, Poisson and multinomial
models under l_t separation, t in [1, 2]."""

from .model import (
    AdversarialDraw,
    CanonicalNull,
    ConstantLedger,
    Histogram,
    IndexProfile,
    ModelKind,
    NullSpec,
    PriorKind,
    RateBreakdown,
    SampleSet,
    SpecError,
    TestVerdict,
    canonicalize,
    ingest_samples,
    load_spec,
)
from .rates import (
    exponents,
    fixed_point_bounds,
    frobenius_rate,
    index_A,
    index_I,
    index_U,
    minimax_rate,
    partial_norm,
)
from .statistics import run_test

__version__ = "0.1.0"

__all__ = [
    "AdversarialDraw",
    "CanonicalNull",
    "ConstantLedger",
    "Histogram",
    "IndexProfile",
    "ModelKind",
    "NullSpec",
    "PriorKind",
    "RateBreakdown",
    "SampleSet",
    "SpecError",
    "TestVerdict",
    "canonicalize",
    "exponents",
    "fixed_point_bounds",
    "frobenius_rate",
    "index_A",
    "index_I",
    "index_U",
    "ingest_samples",
    "load_spec",
    "minimax_rate",
    "partial_norm",
    "run_test",
    "__version__",
]
