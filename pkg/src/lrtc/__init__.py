"""Low-rank tensor completion via adaptive over-relaxed consensus ADMM.

The solver completes a partially observed N-mode tensor by minimizing a
weighted sum of nuclear norms of its mode unfoldings, subject to exact
agreement on the observed entries.  Convergence is accelerated with
over-relaxation and a residual-balancing adaptive penalty; fixed-penalty
ADMM and matrix Soft-Impute are included as baselines, together with a
seeded experiment harness and a CLI for image-completion runs.
"""

__version__ = "0.1.0"

from . import kernels
from .experiments import (
    ExperimentSpec,
    ImageInstance,
    SweepResult,
    SyntheticInstance,
    generate_mask,
    run_sweep,
    synthetic_lowrank,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverState,
    soft_impute,
    soft_impute_step,
    solve,
)
from .svt import ThinSVD, svt, thin_svd
from .tensors import (
    DenseTensor,
    ObservationMask,
    UnfoldedMatrix,
    apply_mask,
    fold,
    frobenius_norm,
    nmse,
    unfold,
)

__all__ = [
    "__version__",
    "kernels",
    "DenseTensor",
    "ObservationMask",
    "UnfoldedMatrix",
    "unfold",
    "fold",
    "apply_mask",
    "frobenius_norm",
    "nmse",
    "ThinSVD",
    "thin_svd",
    "svt",
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "solve",
    "soft_impute",
    "soft_impute_step",
    "ExperimentSpec",
    "ImageInstance",
    "SyntheticInstance",
    "SweepResult",
    "generate_mask",
    "synthetic_lowrank",
    "run_sweep",
]
