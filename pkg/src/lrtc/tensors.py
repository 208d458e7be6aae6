"""Dense N-mode tensors, mode-n matricization, observation masks, norms.

Linearization convention
------------------------
A tensor entry (i_1, ..., i_N) lives at flat position
``i_1 + I_1*i_2 + I_1*I_2*i_3 + ...`` -- the first index varies fastest
(column-major multi-index order).  The mode-n unfolding puts index n on the
rows and linearizes the remaining indices on the columns in their original
order, first-listed fastest, so that fold/unfold round-trip bit-exactly.
Modes are numbered 1..N as is usual in the tensor literature.

All values here are immutable after construction and every operation is a
pure function, so they can be shared freely across workers.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "DenseTensor",
    "ObservationMask",
    "UnfoldedMatrix",
    "unfold",
    "fold",
    "apply_mask",
    "frobenius_norm",
    "nmse",
]


@dataclass(frozen=True)
class DenseTensor:
    """N-mode dense float64 tensor held as a flat first-index-fastest buffer."""

    shape: tuple
    data: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 1 or any(s < 1 for s in shape):
            raise ValueError(f"invalid tensor shape {shape}; need N >= 1 extents >= 1")
        data = np.asarray(self.data, dtype=np.float64).ravel()
        if data.size != math.prod(shape):
            raise ValueError(
                f"buffer of length {data.size} does not fill shape {shape}"
            )
        if data.base is not None:
            data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, arr):
        """Build from an N-d array (its memory layout does not matter)."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        return cls(arr.shape, arr.ravel(order="F"))

    def to_array(self):
        """Read-only N-d view of the buffer."""
        return self.data.reshape(self.shape, order="F")

    @property
    def n_modes(self):
        return len(self.shape)

    @property
    def size(self):
        return self.data.size


@dataclass(frozen=True)
class ObservationMask:
    """Index set of observed entries, stored as sorted unique flat indices."""

    shape: tuple
    indices: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        total = math.prod(shape)
        idx = np.unique(np.asarray(self.indices, dtype=np.int64).ravel())
        if idx.size and (idx[0] < 0 or idx[-1] >= total):
            raise ValueError(
                f"mask indices out of range for {total} entries "
                f"(got min {idx[0]}, max {idx[-1]})"
            )
        idx.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", idx)

    @property
    def n_observed(self):
        return int(self.indices.size)

    @property
    def n_total(self):
        return math.prod(self.shape)

    @property
    def ratio(self):
        return self.n_observed / self.n_total

    def complement(self):
        """Flat indices of the unobserved entries."""
        flags = np.zeros(self.n_total, dtype=bool)
        flags[self.indices] = True
        return np.flatnonzero(~flags).astype(np.int64)

    def observed_flags(self):
        """Boolean flat array, True where observed."""
        flags = np.zeros(self.n_total, dtype=bool)
        flags[self.indices] = True
        return flags


@dataclass(frozen=True)
class UnfoldedMatrix:
    """Mode-n matricization: I_n rows, prod of the remaining extents columns."""

    mode: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"unfolded matrix must be 2-d, got {data.ndim}-d")
        if self.mode < 1:
            raise ValueError(f"mode must be >= 1, got {self.mode}")
        object.__setattr__(self, "data", data)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]


def _check_mode(n, n_modes):
    if not 1 <= n <= n_modes:
        raise ValueError(f"mode {n} out of range for an order-{n_modes} tensor")


def unfold(t, n):
    """Mode-n unfolding of `t` (n is 1-based)."""
    _check_mode(n, t.n_modes)
    return UnfoldedMatrix(n, kernels.unfold(t.data, t.shape, n - 1))


def fold(m, n, shape):
    """Fold a mode-n unfolding back into a tensor of `shape`; inverse of unfold."""
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    data = m.data if isinstance(m, UnfoldedMatrix) else np.asarray(m, dtype=np.float64)
    expected = (shape[n - 1], math.prod(shape) // shape[n - 1])
    if data.shape != expected:
        raise ValueError(
            f"matrix of shape {data.shape} cannot fold to {shape} along mode {n}; "
            f"expected {expected}"
        )
    return DenseTensor(shape, kernels.fold(data, shape, n - 1))


def apply_mask(t, mask):
    """Copy the observed entries of `t`, zero the rest."""
    if t.shape != mask.shape:
        raise ValueError(f"tensor shape {t.shape} != mask shape {mask.shape}")
    return DenseTensor(t.shape, kernels.apply_mask(t.data, mask.indices))


def frobenius_norm(t):
    """sqrt of the sum of squared entries."""
    return float(np.linalg.norm(t.data))


def nmse(estimate, truth):
    """Normalized mean squared error ||estimate - truth||_F^2 / ||truth||_F^2."""
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    denom = float(np.dot(truth.data, truth.data))
    if denom == 0.0:
        raise ValueError("NMSE is undefined for an all-zero reference tensor")
    diff = estimate.data - truth.data
    return float(np.dot(diff, diff)) / denom
