"""Pure numpy implementations of the per-iteration kernels.

All kernels operate on flat float64 buffers that linearize the tensor with
the first index fastest (Fortran / column-major multi-index order).
Unfolded matrices put mode-``axis`` on the rows and linearize the remaining
indices, first-listed fastest, on the columns.

The compiled backend in ``_compiled.pyx`` implements the same contracts and
is required to be bit-identical (same operations, same order) so that a run
is reproducible regardless of which backend got selected.
"""

import numpy as np

name = "numpy"


def unfold(flat, shape, axis):
    """Mode unfolding of a flat buffer; returns an (I_axis, prod rest) matrix."""
    arr = flat.reshape(shape, order="F")
    return np.moveaxis(arr, axis, 0).reshape(shape[axis], -1, order="F")


def fold(mat, shape, axis):
    """Inverse of :func:`unfold`; returns the flat buffer."""
    rest = shape[:axis] + shape[axis + 1:]
    arr = np.asarray(mat).reshape((shape[axis],) + rest, order="F")
    return np.moveaxis(arr, 0, axis).ravel(order="F")


def apply_mask(flat, indices):
    """Zero everything outside the observed index set."""
    out = np.zeros_like(flat)
    out[indices] = flat[indices]
    return out


def consensus_update(ms, us, shape, observed_flat, indices):
    """Fused X-update: average the folded (M_n - U_n), then pin observed entries.

    numpy pays one folded temporary per mode plus the running sum; the
    compiled backend does the same arithmetic in a single pass per mode.
    """
    acc = fold(ms[0] - us[0], shape, 0)
    for axis in range(1, len(shape)):
        acc = acc + fold(ms[axis] - us[axis], shape, axis)
    x = acc / len(shape)
    x[indices] = observed_flat[indices]
    return x
