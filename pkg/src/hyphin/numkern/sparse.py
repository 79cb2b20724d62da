"""Sparse binary matrices and a deterministic sparse-dense product.

The incidence matrix of a hypergraph is binary, so coordinates alone
describe it. Coordinates are kept in canonical row-major sorted order and
the product accumulates strictly in that order, which keeps repeated runs
bit-identical.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .dense import as_matrix


class SparseBinaryMatrix:
    """Duplicate-free coordinate set with row-major canonical order."""

    __slots__ = ("rows", "cols", "row_idx", "col_idx")

    def __init__(self, rows: int, cols: int, coords=()):
        if rows < 0 or cols < 0:
            raise DimensionError(f"negative shape ({rows}, {cols})")
        self.rows = int(rows)
        self.cols = int(cols)
        pairs = sorted(set((int(r), int(c)) for r, c in coords))
        for r, c in pairs:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise DimensionError(
                    f"coordinate ({r}, {c}) out of bounds for shape "
                    f"({self.rows}, {self.cols})"
                )
        self.row_idx = np.array([p[0] for p in pairs], dtype=np.int64)
        self.col_idx = np.array([p[1] for p in pairs], dtype=np.int64)

    @property
    def nnz(self) -> int:
        return len(self.row_idx)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def coords(self):
        return list(zip(self.row_idx.tolist(), self.col_idx.tolist()))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.rows, self.cols))
        dense[self.row_idx, self.col_idx] = 1.0
        return dense

    def transpose(self) -> "SparseBinaryMatrix":
        return SparseBinaryMatrix(
            self.cols, self.rows, zip(self.col_idx, self.row_idx)
        )

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_idx, minlength=self.rows).astype(np.float64)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.col_idx, minlength=self.cols).astype(np.float64)


def spmm(s: SparseBinaryMatrix, x, row_scale=None, col_scale=None) -> np.ndarray:
    """Compute ``diag(row_scale) @ S @ diag(col_scale) @ X`` densely.

    Scales are optional and let the normalized-adjacency chain be applied
    without ever materializing scaled copies of S. Accumulation within
    each output row runs left to right over the canonical coordinate
    order, so the reduction order is deterministic.
    """
    x = as_matrix(x, "spmm dense operand")
    if s.cols != x.shape[0]:
        raise DimensionError(
            f"sparse shape {s.shape} incompatible with dense shape {x.shape}"
        )
    if col_scale is not None:
        col_scale = np.asarray(col_scale, dtype=np.float64)
        if col_scale.shape != (s.cols,):
            raise DimensionError(
                f"col_scale shape {col_scale.shape} != ({s.cols},)"
            )
        x = x * col_scale[:, None]

    out = np.zeros((s.rows, x.shape[1]))
    if s.nnz:
        gathered = x[s.col_idx]
        # reduceat folds each contiguous run of equal row indices in order
        starts = np.flatnonzero(
            np.concatenate(([True], s.row_idx[1:] != s.row_idx[:-1]))
        )
        sums = np.add.reduceat(gathered, starts, axis=0)
        out[s.row_idx[starts]] = sums

    if row_scale is not None:
        row_scale = np.asarray(row_scale, dtype=np.float64)
        if row_scale.shape != (s.rows,):
            raise DimensionError(
                f"row_scale shape {row_scale.shape} != ({s.rows},)"
            )
        out = out * row_scale[:, None]
    return out
