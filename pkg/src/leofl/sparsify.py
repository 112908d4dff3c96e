"""Top-Q sparsification, error feedback, and incremental-aggregation steps.

Two in-network schemes operate on sparse index/value messages:
  - sparse incremental aggregation (SIA): each satellite Top-Q-compresses its
    own error-compensated gradient and merges it into the incoming aggregate,
    so message support can grow hop by hop;
  - constant-length SIA (CL-SIA): Top-Q is applied after merging, pinning every
    outgoing message at Q entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SparseGradient:
    """Immutable index/value view of a sparse vector of dimension `dim`."""

    dim: int
    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, same length

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("indices out of range")
        if len(idx) > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def densify(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @classmethod
    def empty(cls, dim: int) -> "SparseGradient":
        return cls(dim, np.empty(0, dtype=np.int64), np.empty(0))

    @classmethod
    def from_dense(cls, v: np.ndarray) -> "SparseGradient":
        idx = np.nonzero(v)[0]
        return cls(len(v), idx.astype(np.int64), np.asarray(v, dtype=np.float64)[idx])


@dataclass
class ErrorState:
    """Per-satellite sparsification residual carried across rounds."""

    residual: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "ErrorState":
        return cls(np.zeros(dim))


@dataclass(frozen=True)
class SizeModel:
    """Wire-size accounting: each entry costs value bits plus index bits."""

    value_bits: int
    dim: int
    index_bits: int = field(init=False)

    def __post_init__(self):
        if self.value_bits <= 0 or self.dim <= 0:
            raise ValueError("value_bits and dim must be positive")
        # smallest b with 2**b >= dim
        object.__setattr__(self, "index_bits", (self.dim - 1).bit_length())

    def dense_bits(self) -> int:
        return self.dim * self.value_bits


def top_q(v: np.ndarray, q_count: int) -> SparseGradient:
    """Keep the q_count largest-magnitude entries; ties go to the lower index.

    Explicit zeros are never stored, so the result can hold fewer entries.
    """
    if q_count < 0:
        raise ValueError("Q must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    n = len(v)
    if q_count >= n:
        return SparseGradient.from_dense(v)
    # stable sort on descending magnitude preserves index order among ties
    order = np.argsort(-np.abs(v), kind="stable")[:q_count]
    keep = np.sort(order)
    vals = v[keep]
    nz = vals != 0.0
    return SparseGradient(n, keep[nz].astype(np.int64), vals[nz])


def sparse_add(a: SparseGradient, b: SparseGradient) -> SparseGradient:
    """Union of supports, summing values on common indices."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims differ: {a.dim} vs {b.dim}")
    idx = np.concatenate([a.indices, b.indices])
    val = np.concatenate([a.values, b.values])
    uniq, inv = np.unique(idx, return_inverse=True)
    summed = np.zeros(len(uniq))
    np.add.at(summed, inv, val)
    return SparseGradient(a.dim, uniq, summed)


def _error_compensated(g: np.ndarray, data_size: float, err: ErrorState) -> np.ndarray:
    if data_size <= 0:
        raise ValueError("data size must be positive")
    if len(g) != len(err.residual):
        raise DimensionMismatch("gradient and residual dims differ")
    return data_size * np.asarray(g, dtype=np.float64) + err.residual


def sia_step(
    g: np.ndarray,
    data_size: float,
    err: ErrorState,
    incoming: SparseGradient,
    q_count: int,
) -> tuple[SparseGradient, ErrorState]:
    """One satellite's SIA step: compensate, Top-Q, merge into the aggregate."""
    compensated = _error_compensated(g, data_size, err)
    if incoming.dim != len(compensated):
        raise DimensionMismatch("incoming aggregate dim differs")
    own = top_q(compensated, q_count)
    new_err = ErrorState(compensated - own.densify())
    return sparse_add(incoming, own), new_err


def clsia_step(
    g: np.ndarray,
    data_size: float,
    err: ErrorState,
    incoming: SparseGradient,
    q_count: int,
) -> tuple[SparseGradient, ErrorState]:
    """One satellite's CL-SIA step: compensate, merge, then Top-Q the total."""
    compensated = _error_compensated(g, data_size, err)
    if incoming.dim != len(compensated):
        raise DimensionMismatch("incoming aggregate dim differs")
    merged = incoming.densify() + compensated
    outgoing = top_q(merged, q_count)
    new_err = ErrorState(merged - outgoing.densify())
    return outgoing, new_err


def message_bits(s: SparseGradient, m: SizeModel) -> int:
    if s.dim != m.dim:
        raise DimensionMismatch(f"dims differ: {s.dim} vs {m.dim}")
    return s.nnz * (m.value_bits + m.index_bits)


def q_to_count(q: float, dim: int) -> int:
    """Map a sparsification ratio in (0, 1] to an entry count, at least 1."""
    if not 0 < q <= 1:
        raise ValueError(f"sparsification ratio must be in (0, 1], got {q}")
    return max(1, math.ceil(q * dim))
