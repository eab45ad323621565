"""Greedy top-k sparsification of gradient vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import as_vector


@dataclass(frozen=True)
class SparseVector:
    """At-most-k-sparse vector stored as sorted (index, value) pairs.

    Zeros are never stored, so ``nnz`` may be smaller than the sparsity
    level that produced the vector.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing and within [0, dim)")
            if np.any(val == 0):
                raise ValueError("SparseVector must not store zeros")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, v) -> "SparseVector":
        v = as_vector(v)
        idx = np.flatnonzero(v)
        return cls(v.shape[0], idx, v[idx])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def top_k_indices(v: np.ndarray, k: int) -> np.ndarray:
    """Sorted indices of the ``k`` largest ``|v|``; ties go to the lowest index.

    Uses a partial selection to find the k-th magnitude, then resolves the
    boundary ties explicitly, so the result is a set independent of the
    selection order.
    """
    n = v.shape[0]
    if k >= n:
        return np.arange(n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    mag = np.abs(v)
    kth = np.partition(mag, n - k)[n - k]
    above = np.flatnonzero(mag > kth)
    ties = np.flatnonzero(mag == kth)[: k - above.size]
    return np.sort(np.concatenate([above, ties]))


def top_k(v, kappa: int) -> SparseVector:
    """Keep the ``kappa`` largest-magnitude entries of ``v`` and zero the rest."""
    v = as_vector(v)
    n = v.shape[0]
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must be in [1, {n}], got {kappa}")
    idx = top_k_indices(v, kappa)
    idx = idx[v[idx] != 0]
    return SparseVector(n, idx, v[idx])


def to_dense(s: SparseVector) -> np.ndarray:
    out = np.zeros(s.dim)
    out[s.indices] = s.values
    return out
