"""Dense and sparse (CSR) matrix kernels used by the graph networks.

Dense matrices are plain 2-D numpy arrays. On-disk payloads are float32;
in-memory numerics run in float64 so that normalization, losses and
gradients meet tight tolerances. Sparse matrices are compressed sparse
row only, wrapped in :class:`SparseAdjacency`.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SparseAdjacency:
    """Square CSR matrix holding edge affinities.

    Immutable after construction. Column indices are strictly increasing
    within each row; values are finite. When ``symmetric`` is set, entry
    (i, j) is present iff (j, i) is present with an equal value.
    """

    def __init__(self, n, row_offsets, col_indices, values, symmetric=False,
                 validate=True):
        self.n = int(n)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int32)
        self.values = np.ascontiguousarray(values)
        self.symmetric = bool(symmetric)
        self._scipy_cache = None
        self._t_cache = None
        if self.values.dtype not in (np.float32, np.float64):
            self.values = self.values.astype(np.float64)
        if validate:
            self._validate()

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    @property
    def shape(self):
        return (self.n, self.n)

    def _validate(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        if self.row_offsets.shape != (self.n + 1,):
            raise ValueError(
                f"row_offsets must have length n+1={self.n + 1}, "
                f"got {self.row_offsets.shape[0]}")
        if self.row_offsets[0] != 0 or np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        nnz = self.nnz
        if self.col_indices.shape != (nnz,) or self.values.shape != (nnz,):
            raise ValueError("col_indices/values length must equal row_offsets[-1]")
        if nnz:
            if self.col_indices.min() < 0 or self.col_indices.max() >= self.n:
                raise ValueError("column index out of range")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("affinity values must be finite")
            # strictly increasing columns within each row
            rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (np.diff(self.col_indices) <= 0)):
                raise ValueError("column indices must be strictly increasing per row")
        if self.symmetric:
            m = self._as_scipy()
            if (m != m.T).nnz != 0:
                raise ValueError("matrix flagged symmetric is not symmetric")

    def _as_scipy(self):
        if self._scipy_cache is None:
            self._scipy_cache = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.n, self.n))
        return self._scipy_cache

    def to_dense(self):
        """Densify. Intended for tests and small graphs only."""
        return self._as_scipy().toarray()

    def transpose(self):
        if self._t_cache is None:
            t = self._as_scipy().T.tocsr()
            t.sort_indices()
            out = SparseAdjacency(self.n, t.indptr, t.indices, t.data,
                                  symmetric=self.symmetric, validate=False)
            out._t_cache = self
            self._t_cache = out
        return self._t_cache

    def row(self, i):
        """Column indices and values of row ``i``."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    @classmethod
    def identity(cls, n, dtype=np.float64):
        idx = np.arange(n, dtype=np.int32)
        return cls(n, np.arange(n + 1, dtype=np.int64), idx,
                   np.ones(n, dtype=dtype), symmetric=True, validate=False)

    @classmethod
    def from_coo(cls, n, rows, cols, values, symmetric=False):
        """Build from unordered triplets with no duplicate (row, col) pairs."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values)
        order = np.lexsort((cols, rows))
        row_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=row_offsets[1:])
        return cls(n, row_offsets, cols[order].astype(np.int32), values[order],
                   symmetric=symmetric)

    def __repr__(self):
        return (f"SparseAdjacency(n={self.n}, nnz={self.nnz}, "
                f"symmetric={self.symmetric})")


def spmm(a, x):
    """Sparse-dense product ``a @ x``; runtime proportional to nnz * x.cols.

    Rows are accumulated in ascending column order, so the result is
    deterministic for fixed inputs.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"dense operand must be 2-D, got ndim={x.ndim}")
    if a.n != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: sparse is {a.n}x{a.n}, dense has {x.shape[0]} rows")
    return a._as_scipy() @ x


def dense_matmul(x, w):
    """Matrix product ``x @ w`` with an explicit shape check."""
    x = np.asarray(x)
    w = np.asarray(w)
    if x.ndim != 2 or w.ndim != 2:
        raise ValueError("dense_matmul expects 2-D operands")
    if x.shape[1] != w.shape[0]:
        raise ValueError(
            f"dimension mismatch: {x.shape} @ {w.shape}")
    return x @ w


def relu(x):
    """Elementwise max(0, x)."""
    return np.maximum(x, 0)


def concat_cols(x, y):
    """Concatenate two matrices along columns; row counts must match."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2:
        raise ValueError("concat_cols expects 2-D operands")
    if x.shape[0] != y.shape[0]:
        raise ValueError(
            f"row-count mismatch: {x.shape[0]} vs {y.shape[0]}")
    return np.concatenate([x, y], axis=1)


def l2_normalize_rows(x):
    """Scale each row to unit Euclidean norm; zero rows pass through.

    Always returns float64 so that unit norms hold to ~1e-15.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("l2_normalize_rows expects a 2-D matrix")
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe
