"""Consensus ADMM for sum-of-nuclear-norms tensor completion.

The solver minimizes ``lam * sum_n alphas[n] * ||M_n||_*`` subject to every
``M_n`` agreeing with the mode-n unfolding of the estimate and the estimate
matching the observed entries exactly.  Each iteration runs

1. consensus X-update: unobserved entries become the mode-average of the
   folded ``M_n - U_n``, observed entries are pinned to the data;
2. per mode: an over-relaxed blend ``x_hat = xi * X_(n) + (1 - xi) * M_n``,
   a singular-value-thresholding M-update, and the dual ascent
   ``U_n += x_hat - M_n``;
3. primal/dual residuals, the residual-balancing penalty update, and the
   dual rescale that keeps ``rho * U_n`` invariant.

Two baselines live here as well: the same loop with the penalty frozen and
``xi = 1`` (plain fixed-penalty consensus ADMM, selected via the config
toggles), and the matrix Soft-Impute recursion.

Stopping rule: relative residuals
``r / max(1, sqrt(sum_n ||X_(n)||_F^2))`` and
``s / max(1, sqrt(rho * sum_n ||U_n||_F^2))`` both below ``tol``.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels, tensors
from .svt import nuclear_norm, shrink, svt, thin_svd
from .tensors import DenseTensor

__all__ = [
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "init_state",
    "init_rho",
    "resolve_lambda",
    "x_update",
    "m_update",
    "u_update",
    "residuals",
    "rho_update",
    "rescale_duals",
    "objective",
    "step",
    "solve",
    "soft_impute_step",
    "soft_impute",
]

logger = logging.getLogger(__name__)

# default lam when not set: mean nonzero singular value of the initial
# estimate divided by this, tying the shrinkage scale to the data
LAMBDA_SPECTRUM_DIVISOR = 50.0

SVT_SCALINGS = ("fixed", "penalty-scaled")


@dataclass
class SolverConfig:
    """Tunables of the completion solver.

    lam : nuclear norm weight; None derives it from the data at init time
        (mean nonzero singular value of the initial estimate / 50).
    alphas : per-mode weights, nonnegative, summing to 1; None means uniform.
    xi : over-relaxation factor in [1, 2); only used when over_relax is on.
    mu, tau_adapt : residual-balance factor and penalty scaling factor of the
        adaptive rho rule (rho grows/shrinks by tau_adapt whenever one
        residual exceeds mu times the other).
    rho_min, rho_max : penalty bounds.
    rho_init_override : explicit rho0, bypassing the data-driven init.
    tol : relative-residual stopping tolerance.
    t_max : iteration cap.
    adaptive_rho, over_relax : feature toggles; both off gives the plain
        fixed-penalty baseline.
    svt_scaling : "fixed" keeps the SVT threshold at alphas[n]*lam regardless
        of rho; "penalty-scaled" uses alphas[n]*lam/rho (the conventional
        proximal step).  The two coincide when rho is constant at 1.
    clip_range : optional (lo, hi) interval applied to the final result only.
    """

    lam: float | None = None
    alphas: tuple | None = None
    xi: float = 1.7
    mu: float = 10.0
    tau_adapt: float = 2.0
    rho_min: float = 0.01
    rho_max: float = 1000.0
    rho_init_override: float | None = None
    tol: float = 1e-5
    t_max: int = 500
    adaptive_rho: bool = True
    over_relax: bool = True
    svt_scaling: str = "fixed"
    clip_range: tuple | None = None

    def validate(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.alphas is not None:
            a = np.asarray(self.alphas, dtype=np.float64)
            if a.ndim != 1 or a.size < 1:
                raise ValueError("alphas must be a nonempty 1-d sequence")
            if np.any(a < 0) or abs(float(a.sum()) - 1.0) > 1e-12:
                raise ValueError("alphas must be nonnegative and sum to 1")
        if not 1.0 <= self.xi < 2.0:
            raise ValueError(f"xi must lie in [1, 2), got {self.xi}")
        if not self.mu > 1.0:
            raise ValueError(f"mu must exceed 1, got {self.mu}")
        if not self.tau_adapt > 1.0:
            raise ValueError(f"tau_adapt must exceed 1, got {self.tau_adapt}")
        if not 0.0 < self.rho_min <= self.rho_max:
            raise ValueError(
                f"need 0 < rho_min <= rho_max, got [{self.rho_min}, {self.rho_max}]"
            )
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be at least 1, got {self.t_max}")
        if self.svt_scaling not in SVT_SCALINGS:
            raise ValueError(
                f"svt_scaling must be one of {SVT_SCALINGS}, got {self.svt_scaling!r}"
            )
        if self.clip_range is not None:
            lo, hi = self.clip_range
            if not lo < hi:
                raise ValueError(f"empty clip range [{lo}, {hi}]")

    def effective_xi(self):
        return self.xi if self.over_relax else 1.0


@dataclass
class SolverState:
    """Per-run ADMM state: estimate, mode matrices, scaled duals, penalty.

    lam and alphas are the values resolved at init time (the config may
    leave either to be derived from the data).
    """

    x: DenseTensor
    m: list
    u: list
    rho: float
    t: int
    m_prev: list
    lam: float
    alphas: np.ndarray


@dataclass
class IterationRecord:
    """Telemetry for one iteration: residuals, penalty after its update,
    objective lam * sum_n alphas[n]*||M_n||_*, and NMSE against the ground
    truth when one was supplied (on the unclipped running estimate)."""

    t: int
    r: float
    s: float
    rho: float
    objective: float
    nmse: float | None = None


def _clip_rho(value, cfg):
    return float(min(max(value, cfg.rho_min), cfg.rho_max))


def _mean_nonzero_sigma(factors):
    """Mean of the numerically nonzero singular values, averaged across modes.

    Returns None when every spectrum is zero (all-zero initial estimate)."""
    means = []
    for f in factors:
        if f.s.size == 0 or f.s[0] <= 0.0:
            continue
        cutoff = f.s[0] * max(f.u.shape[0], f.v.shape[0]) * np.finfo(np.float64).eps
        nz = f.s[f.s > cutoff]
        means.append(float(nz.mean()))
    if not means:
        return None
    return float(np.mean(means))


def _rho_from_spectrum(sigma_bar, n_modes, lam, cfg):
    if cfg.rho_init_override is not None:
        return _clip_rho(cfg.rho_init_override, cfg)
    if sigma_bar is None:
        logger.warning(
            "initial estimate has an all-zero spectrum; falling back to rho0 = 1"
        )
        return _clip_rho(1.0, cfg)
    return _clip_rho(sigma_bar / (n_modes * lam), cfg)


def _prepare(observed, mask, cfg, warm_start=None):
    """Initial fill, per-mode SVDs and resolved (lam, alphas, rho0)."""
    cfg.validate()
    if observed.shape != mask.shape:
        raise ValueError(
            f"tensor shape {observed.shape} != mask shape {mask.shape}"
        )
    if mask.n_observed == 0:
        raise ValueError("cannot initialize the solver from an empty mask")
    if not np.all(np.isfinite(observed.data)):
        raise ValueError("observed tensor contains non-finite entries")
    n = observed.n_modes

    if cfg.alphas is None:
        alphas = np.full(n, 1.0 / n)
    else:
        alphas = np.asarray(cfg.alphas, dtype=np.float64)
        if alphas.size != n:
            raise ValueError(
                f"config carries {alphas.size} mode weights for an order-{n} tensor"
            )

    if warm_start is None:
        obar = float(np.mean(observed.data[mask.indices]))
        x0 = np.full(observed.size, obar)
    else:
        if warm_start.shape != observed.shape:
            raise ValueError(
                f"warm start shape {warm_start.shape} != tensor shape {observed.shape}"
            )
        if not np.all(np.isfinite(warm_start.data)):
            raise ValueError("warm start contains non-finite entries")
        x0 = warm_start.data.copy()
    x0[mask.indices] = observed.data[mask.indices]

    factors = [thin_svd(kernels.unfold(x0, observed.shape, ax)) for ax in range(n)]
    sigma_bar = _mean_nonzero_sigma(factors)
    if cfg.lam is not None:
        lam = float(cfg.lam)
    else:
        if sigma_bar is None:
            raise ValueError(
                "cannot derive lam from an all-zero initial estimate; set cfg.lam"
            )
        lam = sigma_bar / LAMBDA_SPECTRUM_DIVISOR
    rho0 = _rho_from_spectrum(sigma_bar, n, lam, cfg)
    return x0, factors, alphas, lam, rho0


def resolve_lambda(observed, mask, cfg):
    """The lam value a run with this config will actually use."""
    _, _, _, lam, _ = _prepare(observed, mask, cfg)
    return lam


def init_state(observed, mask, cfg, warm_start=None):
    """Initial solver state: mean-filled (or warm-started) estimate, SVT-shrunk
    mode matrices, zero duals, data-driven penalty."""
    x0, factors, alphas, lam, rho0 = _prepare(observed, mask, cfg, warm_start)
    m0 = [shrink(f, alphas[ax] * lam) for ax, f in enumerate(factors)]
    u0 = [np.zeros_like(mi) for mi in m0]
    return SolverState(
        x=DenseTensor(observed.shape, x0),
        m=m0,
        u=u0,
        rho=rho0,
        t=0,
        m_prev=list(m0),
        lam=lam,
        alphas=alphas,
    )


def init_rho(state, cfg):
    """Data-driven initial penalty: mean nonzero singular value of the current
    estimate's unfoldings (averaged across modes) / (N * lam), clamped."""
    shape = state.x.shape
    factors = [
        thin_svd(kernels.unfold(state.x.data, shape, ax)) for ax in range(len(shape))
    ]
    sigma_bar = _mean_nonzero_sigma(factors)
    return _rho_from_spectrum(sigma_bar, len(shape), state.lam, cfg)


def x_update(state, observed, mask):
    """Consensus estimate: mode-average of folded (M_n - U_n) off the mask,
    observed entries pinned to the data."""
    out = kernels.consensus_update(
        state.m, state.u, state.x.shape, observed.data, mask.indices
    )
    return DenseTensor(state.x.shape, out)


def _mode_update(state, xn, cfg, ax):
    """Over-relaxed blend + SVT for one mode; returns the shrunk spectrum too."""
    xi = cfg.effective_xi()
    if xi == 1.0:
        x_hat = xn
    else:
        x_hat = xi * xn + (1.0 - xi) * state.m[ax]
    tau = state.alphas[ax] * state.lam
    if cfg.svt_scaling == "penalty-scaled":
        tau = tau / state.rho
    f = thin_svd(x_hat + state.u[ax])
    m_new = shrink(f, tau)
    return m_new, x_hat, np.maximum(f.s - tau, 0.0)


def m_update(state, x_new, cfg, n):
    """SVT step for mode n against the fresh estimate; returns the new mode
    matrix and the over-relaxed unfolding it was computed from."""
    tensors._check_mode(n, x_new.n_modes)
    xn = kernels.unfold(x_new.data, x_new.shape, n - 1)
    m_new, x_hat, _ = _mode_update(state, xn, cfg, n - 1)
    return m_new, x_hat


def u_update(u_n, x_hat_n, m_n_new):
    """Dual ascent: U_n + x_hat_n - M_n_new."""
    return u_n + x_hat_n - m_n_new


def _sq_norm(a):
    flat = np.ravel(a)
    return float(np.dot(flat, flat))


def _residuals(xns, m, m_prev, rho):
    r2 = 0.0
    s2 = 0.0
    for ax in range(len(m)):
        r2 += _sq_norm(xns[ax] - m[ax])
        s2 += _sq_norm(m[ax] - m_prev[ax])
    return math.sqrt(r2), rho * math.sqrt(s2)


def residuals(state, x_new):
    """Primal residual (estimate vs mode matrices) and rho-scaled dual
    residual (change in the mode matrices since the previous iteration)."""
    shape = x_new.shape
    xns = [kernels.unfold(x_new.data, shape, ax) for ax in range(len(shape))]
    return _residuals(xns, state.m, state.m_prev, state.rho)


def rho_update(rho, r, s, cfg):
    """Residual balancing: grow rho when the primal residual dominates,
    shrink it when the dual does, within [rho_min, rho_max]."""
    if not cfg.adaptive_rho:
        return rho
    if r > cfg.mu * s:
        return min(cfg.tau_adapt * rho, cfg.rho_max)
    if s > cfg.mu * r:
        return max(rho / cfg.tau_adapt, cfg.rho_min)
    return rho


def rescale_duals(u, rho_old, rho_new):
    """Scale every dual by rho_old/rho_new so that rho * U_n is preserved."""
    if rho_old == rho_new:
        return list(u)
    factor = rho_old / rho_new
    return [u_n * factor for u_n in u]


def objective(state, cfg=None):
    """lam * sum_n alphas[n] * ||M_n||_* for the current mode matrices."""
    total = 0.0
    for ax, m_n in enumerate(state.m):
        total += float(state.alphas[ax]) * nuclear_norm(m_n)
    return state.lam * total


def step(state, observed, mask, cfg):
    """One full iteration; returns the new state and its telemetry record.

    All mode updates read the same state snapshot, so they could run
    concurrently; results are joined before the residuals.
    """
    x_new = x_update(state, observed, mask)
    shape = x_new.shape
    new_m, new_u = [], []
    xns = []
    nuc = 0.0
    for ax in range(len(shape)):
        xn = kernels.unfold(x_new.data, shape, ax)
        m_n, x_hat, shrunk = _mode_update(state, xn, cfg, ax)
        new_m.append(m_n)
        new_u.append(u_update(state.u[ax], x_hat, m_n))
        xns.append(xn)
        nuc += float(state.alphas[ax]) * float(shrunk.sum())
    r, s = _residuals(xns, new_m, state.m, state.rho)
    rho_new = rho_update(state.rho, r, s, cfg)
    new_u = rescale_duals(new_u, state.rho, rho_new)
    new_state = SolverState(
        x=x_new,
        m=new_m,
        u=new_u,
        rho=rho_new,
        t=state.t + 1,
        m_prev=state.m,
        lam=state.lam,
        alphas=state.alphas,
    )
    record = IterationRecord(
        t=new_state.t, r=r, s=s, rho=rho_new, objective=state.lam * nuc
    )
    return new_state, record


def _converged(state, record, cfg):
    n = state.x.n_modes
    x_scale = math.sqrt(n) * float(np.linalg.norm(state.x.data))
    u_scale = math.sqrt(state.rho * sum(_sq_norm(u_n) for u_n in state.u))
    r_rel = record.r / max(1.0, x_scale)
    s_rel = record.s / max(1.0, u_scale)
    return max(r_rel, s_rel) < cfg.tol


def solve(observed, mask, cfg, warm_start=None, truth=None):
    """Run the completion solver to convergence or the iteration cap.

    Parameters
    ----------
    observed : DenseTensor
        Data tensor; only the entries under `mask` are trusted.
    mask : ObservationMask
        Index set of the observed entries (must be nonempty).
    cfg : SolverConfig
    warm_start : DenseTensor, optional
        Replaces the mean fill of the initial estimate (observed entries are
        still reset to the data); mode matrices and duals are re-derived
        from it, duals start cold.
    truth : DenseTensor, optional
        Ground truth; when given, every iteration record carries the NMSE of
        the running (unclipped) estimate.

    Returns
    -------
    (result, history, status)
        result is clipped to cfg.clip_range when set; history holds one
        IterationRecord per iteration; status is "converged" or "max_iters".
    """
    state = init_state(observed, mask, cfg, warm_start=warm_start)
    logger.debug(
        "solver start: shape=%s observed=%.1f%% lam=%.6g rho0=%.6g",
        observed.shape, 100.0 * mask.ratio, state.lam, state.rho,
    )
    history = []
    status = "max_iters"
    for _ in range(cfg.t_max):
        state, record = step(state, observed, mask, cfg)
        if truth is not None:
            record.nmse = tensors.nmse(state.x, truth)
        history.append(record)
        if _converged(state, record, cfg):
            status = "converged"
            break
    result = state.x
    if cfg.clip_range is not None:
        lo, hi = cfg.clip_range
        result = DenseTensor(result.shape, np.clip(result.data, lo, hi))
    logger.debug(
        "solver done: %s after %d iterations (r=%.3g, s=%.3g)",
        status, len(history), history[-1].r, history[-1].s,
    )
    return result, history, status


def soft_impute_step(x_prev, observed, omega, lam):
    """One Soft-Impute sweep: refresh the observed entries, then SVT by lam."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if x_prev.ndim != 2 or x_prev.shape != observed.shape:
        raise ValueError(
            f"matrix shapes disagree: {x_prev.shape} vs {observed.shape}"
        )
    if omega.shape != x_prev.shape:
        raise ValueError(f"mask shape {omega.shape} != matrix shape {x_prev.shape}")
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    z = x_prev.ravel(order="F").copy()
    obs = observed.ravel(order="F")
    z[omega.indices] = obs[omega.indices]
    return svt(z.reshape(x_prev.shape, order="F"), lam)


def soft_impute(observed, omega, lam, tol=1e-7, max_iters=500):
    """Iterate soft_impute_step from the zero-filled observations until the
    relative change drops below tol; returns (matrix, iterations)."""
    observed = np.asarray(observed, dtype=np.float64)
    obs = observed.ravel(order="F")
    x = np.zeros_like(obs)
    x[omega.indices] = obs[omega.indices]
    x = x.reshape(observed.shape, order="F")
    for t in range(1, max_iters + 1):
        x_new = soft_impute_step(x, observed, omega, lam)
        delta = float(np.linalg.norm(x_new - x))
        x = x_new
        if delta <= tol * max(1.0, float(np.linalg.norm(x))):
            return x, t
    return x, max_iters
