"""Thin SVD and the singular value thresholding (SVT) operator.

SVT_tau(A) = U (Sigma - tau I)_+ V^T soft-shrinks the singular values of A
by tau; it is the proximal operator of tau * nuclear norm.  The
decomposition itself is delegated to LAPACK through numpy -- the contract
is the ThinSVD invariants (orthonormal factors, nonincreasing nonnegative
spectrum, faithful reconstruction), not a particular algorithm.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ThinSVD", "thin_svd", "svt", "nuclear_norm"]


@dataclass(frozen=True)
class ThinSVD:
    """Factors of A = u @ diag(s) @ v.T with r = min(A.shape) columns."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.s) @ self.v.T


def _as_finite_matrix(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got {a.ndim}-d input")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def thin_svd(a):
    """Thin singular value decomposition of a real matrix."""
    a = _as_finite_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return ThinSVD(u, s, vh.T)


def shrink(f, tau):
    """Reconstruct from `f` with singular values soft-shrunk by `tau`."""
    keep = f.s - tau
    k = int(np.count_nonzero(keep > 0.0))
    if k == 0:
        return np.zeros((f.u.shape[0], f.v.shape[0]))
    return (f.u[:, :k] * keep[:k]) @ f.v[:, :k].T


def svt(a, tau):
    """Singular value thresholding: shrink every singular value of `a` by `tau`."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    if tau == 0.0:
        return _as_finite_matrix(a).copy()
    return shrink(thin_svd(a), tau)


def nuclear_norm(a):
    """Sum of the singular values."""
    return float(np.linalg.svd(_as_finite_matrix(a), compute_uv=False).sum())
