"""Reproducible experiment harness: seeded masks, synthetic instances,
observation-ratio sweeps, warm-start pipelines, CSV logging.

Randomness policy: every random draw comes from numpy's PCG64 generator with
an explicit integer seed, and all per-cell seeds are derived from the base
seed through ``numpy.random.SeedSequence`` so that a sweep is reproducible
across platforms and across process restarts.  Within one sweep every config
at a given (ratio, seed) sees the identical mask.
"""

import csv
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import solver, tensors
from .solver import IterationRecord, SolverConfig
from .tensors import DenseTensor, ObservationMask

__all__ = [
    "ImageInstance",
    "SyntheticInstance",
    "ExperimentSpec",
    "CellResult",
    "SweepResult",
    "derive_seed",
    "generate_mask",
    "synthetic_lowrank",
    "mode_multiply",
    "run_sweep",
    "write_history",
    "read_history",
    "write_summary",
    "write_details",
]

HISTORY_COLUMNS = ("t", "r", "s", "rho", "objective", "nmse")
SUMMARY_COLUMNS = ("cfg", "ratio", "nmse", "iters", "status")
DETAIL_COLUMNS = ("cfg", "ratio", "seed", "nmse", "iters", "status")

# one float64 survives a text round trip at 17 significant digits
_FMT = "{:.17g}"


def derive_seed(base, *path):
    """Deterministic child seed for (base, *path); stable across platforms."""
    seq = np.random.SeedSequence([int(base), *[int(p) for p in path]])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def generate_mask(shape, ratio, seed):
    """Uniform observation mask with exactly round(ratio * total) entries.

    Sampling is uniform over all flat indices (not per-slice), so
    channel-structured missingness is out of scope here.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"observation ratio must lie in (0, 1], got {ratio}")
    total = math.prod(int(s) for s in shape)
    count = int(round(ratio * total))
    rng = np.random.Generator(np.random.PCG64(seed))
    indices = rng.choice(total, size=count, replace=False)
    return ObservationMask(shape, indices)


def mode_multiply(t, mat, n):
    """Multiply tensor `t` along mode n (1-based) by `mat`; extent I_n becomes
    mat.shape[0]."""
    unfolded = tensors.unfold(t, n).data
    new_shape = list(t.shape)
    new_shape[n - 1] = mat.shape[0]
    return tensors.fold(mat @ unfolded, n, tuple(new_shape))


def synthetic_lowrank(shape, ranks, seed, noise_std=0.0):
    """Random Tucker-form tensor: core of the given multilinear ranks times
    orthonormal factors per mode, plus optional white noise."""
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise ValueError(f"{len(ranks)} ranks for an order-{len(shape)} tensor")
    for extent, rank in zip(shape, ranks):
        if not 1 <= rank <= extent:
            raise ValueError(f"mode rank {rank} exceeds extent {extent}")
    rng = np.random.Generator(np.random.PCG64(seed))
    t = DenseTensor.from_array(rng.standard_normal(ranks))
    for ax, (extent, rank) in enumerate(zip(shape, ranks)):
        q, _ = np.linalg.qr(rng.standard_normal((extent, rank)))
        t = mode_multiply(t, q, ax + 1)
    data = t.data
    if noise_std > 0.0:
        data = data + noise_std * rng.standard_normal(data.size)
    return DenseTensor(shape, data)


@dataclass(frozen=True)
class ImageInstance:
    """Ground truth loaded from an image file (H x W x 3, values 0..255)."""

    path: str

    def load(self, seed):
        from .cli import load_image

        return load_image(self.path)


@dataclass(frozen=True)
class SyntheticInstance:
    """Seeded random Tucker-form ground truth."""

    shape: tuple
    ranks: tuple
    noise_std: float = 0.0

    def load(self, seed):
        return synthetic_lowrank(self.shape, self.ranks, seed, self.noise_std)


@dataclass
class ExperimentSpec:
    """One sweep: an instance, observation ratios, seeds, named solver configs.

    n_seeds independent repetitions run per cell (default 3; medians are
    reported).  When warm_start_from names one of the configs, every other
    config is additionally run warm-started from that config's result at the
    same (ratio, seed), labelled "<name>+warm".
    """

    instance: object
    ratios: tuple
    seed: int
    solver_cfgs: dict
    n_seeds: int = 3
    warm_start_from: str = None

    def validate(self):
        if not self.solver_cfgs:
            raise ValueError("at least one solver config is required")
        ratios = tuple(self.ratios)
        if list(ratios) != sorted(ratios):
            raise ValueError(f"ratios must be sorted, got {ratios}")
        for ratio in ratios:
            if not 0.0 < ratio <= 1.0:
                raise ValueError(f"ratio {ratio} outside (0, 1]")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")
        if self.warm_start_from is not None and (
            self.warm_start_from not in self.solver_cfgs
        ):
            raise ValueError(
                f"warm_start_from={self.warm_start_from!r} is not a config name"
            )


@dataclass
class CellResult:
    """Outcome of one (cfg, ratio, seed) solve."""

    cfg: str
    ratio: float
    seed: int
    nmse: float
    iters: int
    status: str
    wall_time: float
    lam: float
    history: list = field(repr=False, default_factory=list)


@dataclass
class SweepResult:
    """All cells of a sweep plus median aggregation per (cfg, ratio)."""

    cells: list

    def cfg_names(self):
        seen = dict.fromkeys(c.cfg for c in self.cells)
        return list(seen)

    def select(self, cfg=None, ratio=None, seed=None):
        out = self.cells
        if cfg is not None:
            out = [c for c in out if c.cfg == cfg]
        if ratio is not None:
            out = [c for c in out if c.ratio == ratio]
        if seed is not None:
            out = [c for c in out if c.seed == seed]
        return out

    def median_nmse(self, cfg, ratio):
        return statistics.median(c.nmse for c in self.select(cfg, ratio))

    def median_iters(self, cfg, ratio):
        return statistics.median(c.iters for c in self.select(cfg, ratio))

    def summary_rows(self):
        """One median row per (cfg, ratio): cfg, ratio, nmse, iters, status."""
        rows = []
        ratios = sorted({c.ratio for c in self.cells})
        for cfg in self.cfg_names():
            for ratio in ratios:
                cells = self.select(cfg, ratio)
                if not cells:
                    continue
                status = (
                    "converged"
                    if all(c.status == "converged" for c in cells)
                    else "max_iters"
                )
                rows.append(
                    (
                        cfg,
                        ratio,
                        statistics.median(c.nmse for c in cells),
                        statistics.median(c.iters for c in cells),
                        status,
                    )
                )
        return rows


def _solve_cell(cfg_name, cfg, truth, observed, mask, seed, ratio, warm=None):
    start = time.perf_counter()
    lam = solver.resolve_lambda(observed, mask, cfg)
    result, history, status = solver.solve(
        observed, mask, cfg, warm_start=warm, truth=truth
    )
    wall = time.perf_counter() - start
    return result, CellResult(
        cfg=cfg_name,
        ratio=ratio,
        seed=seed,
        nmse=tensors.nmse(result, truth),
        iters=len(history),
        status=status,
        wall_time=wall,
        lam=lam,
        history=history,
    )


def run_sweep(spec, on_cell=None):
    """Run every (cfg, ratio, seed) cell of the spec.

    Masks are generated once per (ratio, seed) and shared by all configs;
    warm-started cells run after their provider and receive its result.
    Identical specs produce identical numbers (wall times aside).
    `on_cell(cell, result, observed)` is invoked after each solve, letting
    callers persist reconstructions without holding every tensor in memory.
    """
    spec.validate()
    cells = []
    for rep in range(spec.n_seeds):
        instance_seed = derive_seed(spec.seed, rep)
        truth = spec.instance.load(instance_seed)
        for ridx, ratio in enumerate(spec.ratios):
            mask_seed = derive_seed(spec.seed, rep, ridx)
            mask = generate_mask(truth.shape, ratio, mask_seed)
            observed = tensors.apply_mask(truth, mask)
            provider_result = None
            pending = list(spec.solver_cfgs.items())
            warm_pending = []
            if spec.warm_start_from is not None:
                warm_pending = [
                    (f"{name}+warm", cfg, True)
                    for name, cfg in spec.solver_cfgs.items()
                    if name != spec.warm_start_from
                ]
            runs = [(name, cfg, False) for name, cfg in pending] + warm_pending
            for cfg_name, cfg, warmed in runs:
                result, cell = _solve_cell(
                    cfg_name,
                    cfg,
                    truth,
                    observed,
                    mask,
                    mask_seed,
                    ratio,
                    warm=provider_result if warmed else None,
                )
                cells.append(cell)
                if cfg_name == spec.warm_start_from:
                    provider_result = result
                if on_cell is not None:
                    on_cell(cell, result, observed)
    return SweepResult(cells)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FMT.format(float(value))


def write_history(history, sink):
    """Write iteration records as CSV (t,r,s,rho,objective,nmse); floats carry
    17 significant digits so the file round-trips exactly."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for rec in history:
        writer.writerow(
            [
                str(rec.t),
                _fmt(rec.r),
                _fmt(rec.s),
                _fmt(rec.rho),
                _fmt(rec.objective),
                _fmt(rec.nmse),
            ]
        )


def read_history(source):
    """Parse a history CSV back into IterationRecord objects."""
    reader = csv.reader(source)
    header = next(reader)
    if tuple(header) != HISTORY_COLUMNS:
        raise ValueError(f"unexpected history header {header}")
    records = []
    for row in reader:
        t, r, s, rho, objective, nm = row
        records.append(
            IterationRecord(
                t=int(t),
                r=float(r),
                s=float(s),
                rho=float(rho),
                objective=float(objective),
                nmse=None if nm == "" else float(nm),
            )
        )
    return records


def write_summary(result, sink):
    """Median summary CSV: cfg,ratio,nmse,iters,status."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for cfg, ratio, nm, iters, status in result.summary_rows():
        writer.writerow([cfg, repr(float(ratio)), _fmt(nm), _fmt(iters), status])


def write_details(result, sink):
    """Per-cell CSV: cfg,ratio,seed,nmse,iters,status."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(DETAIL_COLUMNS)
    for c in result.cells:
        writer.writerow(
            [
                c.cfg,
                repr(float(c.ratio)),
                str(c.seed),
                _fmt(c.nmse),
                str(c.iters),
                c.status,
            ]
        )
