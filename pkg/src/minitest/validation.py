"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .model import Histogram, ModelKind, NullSpec, SpecError


def check_null_vector(p, model) -> np.ndarray:
    """Return ``p`` as a finite float vector or raise :class:`SpecError`."""
    try:
        arr = check_array(p, ensure_2d=False, dtype=float, ensure_all_finite=True,
                          input_name="p")
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    if arr.ndim != 1:
        raise SpecError("p must be one-dimensional")
    # model-specific constraints are enforced by NullSpec
    ModelKind.parse(model)
    return arr


def check_observations(X, spec: NullSpec):
    """Validate a data set for ``spec``: a Histogram passes through, rows are checked."""
    if isinstance(X, Histogram):
        return X
    ensure_2d = spec.model_kind is not ModelKind.MULTINOMIAL
    try:
        arr = check_array(X, ensure_2d=ensure_2d, dtype=None, ensure_all_finite=True,
                          ensure_min_samples=0, ensure_min_features=0, input_name="X")
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    if arr.dtype.kind not in "iuf b":
        raise SpecError("observations must be numeric")
    return arr
