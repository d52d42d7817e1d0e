"""scikit-learn style wrapper around the identity test.

``fit`` takes the null vector; ``test``/``decide`` take one data set and
``predict`` takes a sequence of data sets, returning one 0/1 decision per
set (1 = reject the null).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import ConstantLedger, NullSpec, canonicalize, ingest_samples
from .rates import minimax_rate
from .statistics import effective_profile, run_test
from .validation import check_null_vector, check_observations


class IdentityTest(BaseEstimator):
    """Aggregated bulk / tail-mass / collision test of ``q = p``.

    Parameters mirror :class:`~minitest.model.NullSpec` plus the test
    switches of :func:`~minitest.statistics.run_test`.  ``constants`` is a
    mapping of overrides for the default ledger.
    """

    def __init__(self, model="multinomial", eta=0.1, t=1.0, constants=None, include_t2=False,
                 nosplit=None, strict=True, l2_single=True, tail_form="I"):
        self.model = model
        self.eta = eta
        self.t = t
        self.constants = constants
        self.include_t2 = include_t2
        self.nosplit = nosplit
        self.strict = strict
        self.l2_single = l2_single
        self.tail_form = tail_form

    def fit(self, p, y=None):
        p = check_null_vector(p, self.model)
        ledger = ConstantLedger.defaults(self.eta, **(self.constants or {}))
        self.spec_ = NullSpec(self.model, p, eta=self.eta, t=self.t, constants=ledger)
        self.canon_ = canonicalize(self.spec_)
        self.n_features_in_ = self.spec_.N
        return self

    def test(self, X, rng: Optional[np.random.Generator] = None):
        """Run the test on one data set and return the full verdict."""
        check_is_fitted(self, "canon_")
        X = check_observations(X, self.spec_)
        sample = ingest_samples(X, self.canon_, rng=rng)
        return run_test(self.canon_, sample, include_t2=self.include_t2, nosplit=self.nosplit,
                        strict=self.strict, l2_single=self.l2_single)

    def decide(self, X, rng=None) -> bool:
        return self.test(X, rng).decide_aggregate

    def predict(self, datasets, rng=None) -> np.ndarray:
        return np.array([int(self.decide(X, rng)) for X in datasets], dtype=np.int64)

    def rate(self, n: int):
        check_is_fitted(self, "canon_")
        return minimax_rate(self.canon_, n, tail_form=self.tail_form)

    def profile(self, n: int):
        check_is_fitted(self, "canon_")
        return effective_profile(self.canon_, n, self.l2_single)
