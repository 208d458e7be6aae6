"""Independent reference implementations used to generate expected values.

Everything here is deliberately written without lrtc's kernels or solver:
unfolding is explicit multi-index enumeration, the ADMM reference is a
straight-line transcription of the per-iteration update equations operating
on plain N-d arrays.  Slow but unambiguous.
"""

import itertools

import numpy as np


def enum_unfold(arr, n):
    """Mode-n unfolding (n is 1-based) by enumerating every multi-index:
    row = i_n, column = remaining indices linearized first-listed-fastest."""
    shape = arr.shape
    rest = [d for d in range(arr.ndim) if d != n - 1]
    cols = 1
    for d in rest:
        cols *= shape[d]
    out = np.zeros((shape[n - 1], cols))
    for idx in itertools.product(*[range(s) for s in shape]):
        col = 0
        mult = 1
        for d in rest:
            col += idx[d] * mult
            mult *= shape[d]
        out[idx[n - 1], col] = arr[idx]
    return out


def enum_fold(mat, n, shape):
    """Inverse of enum_unfold."""
    out = np.zeros(shape)
    rest = [d for d in range(len(shape)) if d != n - 1]
    for idx in itertools.product(*[range(s) for s in shape]):
        col = 0
        mult = 1
        for d in rest:
            col += idx[d] * mult
            mult *= shape[d]
        out[idx] = mat[idx[n - 1], col]
    return out


def svt_ref(a, tau):
    """Reference singular value thresholding via a plain SVD."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u @ np.diag(np.maximum(s - tau, 0.0)) @ vh


def prox_objective(z, a, tau):
    """tau * ||z||_* + 0.5 * ||z - a||_F^2 (what SVT_tau(a) must minimize)."""
    nuc = float(np.linalg.svd(z, compute_uv=False).sum())
    return tau * nuc + 0.5 * float(np.sum((z - a) ** 2))


def plain_admm_reference(observed_arr, omega_bool, lam, alphas, xi, iters):
    """Straight-line fixed-penalty consensus ADMM on N-d arrays.

    Mean fill, SVT-shrunk mode matrices, zero duals; then `iters` sweeps of
    consensus average / over-relaxed blend / SVT with threshold
    alphas[n]*lam / dual ascent.  Returns (x, M list, U list).
    """
    shape = observed_arr.shape
    n_modes = observed_arr.ndim
    obar = observed_arr[omega_bool].mean()
    x = np.where(omega_bool, observed_arr, obar)
    m = [svt_ref(enum_unfold(x, n), alphas[n - 1] * lam) for n in range(1, n_modes + 1)]
    u = [np.zeros_like(mn) for mn in m]
    for _ in range(iters):
        cons = np.zeros(shape)
        for n in range(1, n_modes + 1):
            cons = cons + enum_fold(m[n - 1] - u[n - 1], n, shape)
        cons = cons / n_modes
        x = np.where(omega_bool, observed_arr, cons)
        for n in range(1, n_modes + 1):
            xn = enum_unfold(x, n)
            x_hat = xi * xn + (1.0 - xi) * m[n - 1] if xi != 1.0 else xn
            m_new = svt_ref(x_hat + u[n - 1], alphas[n - 1] * lam)
            u[n - 1] = u[n - 1] + x_hat - m_new
            m[n - 1] = m_new
    return x, m, u
