"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .model import JunctionSpec, validate


class JunctionValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def check_junction(junction: JunctionSpec) -> JunctionSpec:
    if not isinstance(junction, JunctionSpec):
        raise TypeError(f"expected JunctionSpec, got {type(junction).__name__}")
    violations = validate(junction)
    if violations:
        raise JunctionValidationError(violations)
    return junction


def check_densities(X, n_approaches: int | None = None) -> np.ndarray:
    """Coerce densities to a 2-D float array of shape (n_samples, n_approaches).

    A flat sequence is treated as a single sample.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    arr = check_array(arr, dtype=float, ensure_min_features=1)
    if (arr < 0).any():
        raise ValueError("densities must be non-negative")
    if n_approaches is not None and arr.shape[1] != n_approaches:
        raise ValueError(
            f"densities have {arr.shape[1]} columns, junction has {n_approaches} approaches"
        )
    return arr
