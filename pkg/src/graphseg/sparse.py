"""Minimal compressed-sparse-row matrix for the per-epoch Â products."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = ["CsrMatrix"]


class CsrMatrix:
    """Immutable CSR matrix with a dense right-multiply.

    Only what the engine needs: construction from a dense array, matvec /
    matmat against dense float64 arrays, and densification for tests.
    """

    # Above this fill fraction (and below the size cap) products run through
    # a cached dense copy: BLAS beats the gather/segment-sum path by orders
    # of magnitude once most entries are structural.
    DENSE_FILL_THRESHOLD = 0.05
    DENSE_SIZE_CAP = 16_000_000  # entries, i.e. ~128 MB of float64

    __slots__ = ("indptr", "indices", "data", "shape", "symmetric", "_dense_cache")

    def __init__(self, indptr, indices, data, shape, symmetric=False):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.shape = (int(shape[0]), int(shape[1]))
        self.symmetric = bool(symmetric)
        self._dense_cache = None
        if self.indptr.shape != (self.shape[0] + 1,):
            raise ShapeError("indptr length must be rows + 1")
        if self.indices.shape != self.data.shape:
            raise ShapeError("indices and data must align")

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    @classmethod
    def from_dense(cls, dense: np.ndarray, symmetric: bool | None = None) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise ShapeError("from_dense expects a 2-D array")
        rows, cols = np.nonzero(dense)
        counts = np.bincount(rows, minlength=dense.shape[0])
        indptr = np.concatenate(([0], np.cumsum(counts)))
        if symmetric is None:
            symmetric = dense.shape[0] == dense.shape[1] and bool(
                np.abs(dense - dense.T).max(initial=0.0) <= 1e-12
            )
        mat = cls(indptr, cols, dense[rows, cols], dense.shape, symmetric)
        if mat._dense_preferred():
            mat._dense_cache = dense.copy()
        return mat

    def _dense_preferred(self) -> bool:
        cells = self.shape[0] * self.shape[1]
        return cells > 0 and cells <= self.DENSE_SIZE_CAP and self.nnz / cells >= self.DENSE_FILL_THRESHOLD

    def dot(self, x: np.ndarray) -> np.ndarray:
        """Dense product self @ x, x of shape (cols,) or (cols, h)."""
        x = np.asarray(x, dtype=np.float64)
        vector = x.ndim == 1
        if vector:
            x = x.reshape(-1, 1)
        if x.shape[0] != self.shape[1]:
            raise ShapeError(f"dot: {self.shape} x {x.shape}")
        if self._dense_preferred():
            if self._dense_cache is None:
                self._dense_cache = self.to_dense()
            out = self._dense_cache @ x
        else:
            out = np.zeros((self.shape[0], x.shape[1]), dtype=np.float64)
            if self.nnz:
                prod = self.data[:, None] * x[self.indices]
                counts = np.diff(self.indptr)
                nonempty = counts > 0
                # CSR data is packed, so the segments of consecutive nonempty
                # rows are contiguous and reduceat sums exactly one row each.
                starts = self.indptr[:-1][nonempty]
                out[nonempty] = np.add.reduceat(prod, starts, axis=0)
        return out[:, 0] if vector else out

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        for i in range(self.shape[0]):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out
