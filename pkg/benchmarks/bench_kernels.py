#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallback.

Times the per-iteration kernels (mode unfold/fold, masked projection, fused
consensus update) on image-sized tensors, then a full solve under each
backend.  The SVD inside the solve runs in LAPACK either way, so the
end-to-end gap is bounded by the share of non-SVD work.

Usage: python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeats 7]
"""

import argparse
import math
import time

import numpy as np

from lrtc import kernels
from lrtc.experiments import generate_mask
from lrtc.solver import SolverConfig, solve
from lrtc.tensors import DenseTensor, apply_mask


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_kernels(side, repeats):
    shape = (side, side, 3)
    total = math.prod(shape)
    rng = np.random.default_rng(0)
    flat = rng.standard_normal(total)
    indices = np.sort(rng.choice(total, size=total // 2, replace=False)).astype(
        np.int64
    )
    ms, us = [], []
    for axis in range(3):
        rows = shape[axis]
        ms.append(rng.standard_normal((rows, total // rows)))
        us.append(rng.standard_normal((rows, total // rows)))

    rows = []
    for kernel, make in (
        ("unfold (mode 2)", lambda b: lambda: b.unfold(flat, shape, 1)),
        ("fold (mode 2)", lambda b: lambda: b.fold(ms[1], shape, 1)),
        ("apply_mask", lambda b: lambda: b.apply_mask(flat, indices)),
        (
            "consensus_update",
            lambda b: lambda: b.consensus_update(ms, us, shape, flat, indices),
        ),
    ):
        cells = {}
        for name in kernels.available_backends():
            backend = kernels.get_backend(name)
            cells[name] = best_of(make(backend), repeats)
        rows.append((f"{side}x{side}x3 {kernel}", cells))
    return rows


def bench_solve(side, repeats):
    shape = (side, side, 3)
    rng = np.random.default_rng(1)
    base = rng.standard_normal((side, 4)) @ rng.standard_normal((4, side))
    img = np.stack([base, base * 0.5, base + 1.0], axis=2)
    truth = DenseTensor.from_array(img)
    mask = generate_mask(shape, 0.4, seed=2)
    observed = apply_mask(truth, mask)
    cfg = SolverConfig(t_max=30, tol=1e-12)  # fixed 30 iterations

    # the SVDs dominate a solve, so expect rough parity here; the kernel
    # rows above are where the backends actually differ
    cells = {}
    active = kernels.backend_name()
    try:
        for name in kernels.available_backends():
            kernels.use(name)
            cells[name] = best_of(lambda: solve(observed, mask, cfg), 3)
    finally:
        kernels.use(active)
    return [(f"{side}x{side}x3 solve (30 iters)", cells)]


def print_table(rows):
    names = sorted({name for _, cells in rows for name in cells})
    label_w = max(len(label) for label, _ in rows) + 2
    header = "kernel".ljust(label_w) + "".join(f"{n:>12s}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for label, cells in rows:
        line = label.ljust(label_w)
        for n in names:
            line += f"{cells[n] * 1e3:>10.3f}ms"
        if len(names) == 2:
            fast, slow = cells.get("compiled"), cells.get("numpy")
            if fast:
                line += f"{slow / fast:>9.2f}x"
        print(line)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    print(f"backends available: {', '.join(kernels.available_backends())}")
    rows = []
    for side in args.sizes:
        rows.extend(bench_kernels(side, args.repeats))
    rows.extend(bench_solve(max(args.sizes), args.repeats))
    print_table(rows)


if __name__ == "__main__":
    main()
