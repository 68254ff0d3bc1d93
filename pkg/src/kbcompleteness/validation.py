"""Argument and input validation shared by the estimator front-ends."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array


def check_tau(tau) -> float:
    tau = float(tau)
    if math.isnan(tau) or not 0.0 <= tau < 0.5:
        raise ValueError(f"tau must lie in [0, 0.5), got {tau}")
    return tau


def check_trailing_fraction(q) -> float:
    q = float(q)
    if math.isnan(q) or not 0.0 < q <= 1.0:
        raise ValueError(f"trailing fraction must lie in (0, 1], got {q}")
    return q


def check_window_days(width) -> int:
    if isinstance(width, bool) or int(width) != width or width < 1:
        raise ValueError(f"window width must be a positive whole number of days, got {width!r}")
    return int(width)


def check_incidence_matrix(X) -> np.ndarray:
    """Validate a 0/1 entities-by-windows incidence matrix.

    Rows are entities, columns are capture windows in time order. Boolean
    input is accepted; any value other than 0 or 1 is rejected.
    """
    X = check_array(X, dtype=None, ensure_min_samples=0, ensure_min_features=1)
    if X.dtype == bool:
        return X.astype(np.int8)
    if not np.isin(X, (0, 1)).all():
        raise ValueError("incidence matrix must contain only 0/1 values")
    return X.astype(np.int8)
