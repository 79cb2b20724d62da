"""Dense matrix helpers.

Matrices are plain float64 numpy arrays with row-major semantics. The
helpers here validate the invariants the rest of the package relies on
(finiteness, 2-D shape) and provide the masked row softmax used by the
attention layers.
"""

import numpy as np

from ..errors import DegenerateRowError, DimensionError


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    require_finite(m, name)
    return m


def require_finite(x: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(x)):
        raise DimensionError(f"{name} contains non-finite entries")


def softmax_rows(x, mask=None) -> np.ndarray:
    """Row-wise softmax restricted to the masked (valid) columns.

    Masked-out entries are exactly 0 in the output; valid entries of each
    row are positive and sum to 1. Uses max-subtraction so arbitrarily
    large scores cannot overflow, which also makes the result invariant
    to per-row constant shifts.
    """
    x = as_matrix(x, "softmax input")
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise DimensionError(
                f"mask shape {mask.shape} does not match input shape {x.shape}"
            )
    valid_counts = mask.sum(axis=1)
    if np.any(valid_counts == 0):
        row = int(np.flatnonzero(valid_counts == 0)[0])
        raise DegenerateRowError(f"softmax row {row} has an empty mask")

    neg_inf = np.where(mask, x, -np.inf)
    shift = neg_inf.max(axis=1, keepdims=True)
    expd = np.where(mask, np.exp(neg_inf - shift), 0.0)
    return expd / expd.sum(axis=1, keepdims=True)
