#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs every hot kernel on a representative workload in this process
(whatever path RECOMB_NUMBA selects, normally the JIT), then re-executes
itself in a subprocess with RECOMB_NUMBA=0 to time the pure-Python path
on identical inputs, verifies both paths produce the same numbers, and
prints a timing table.

The Monte Carlo kernels are expected to match bit for bit (shared
splitmix64 streams, math.log/exp); the dense ODE right-hand side is
vectorized differently on the pure path and is compared at 1e-12.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--scale F]
"""

from __future__ import annotations

import argparse
import os
import statistics
import subprocess
import sys
import tempfile
import time

import numpy as np

from recomb import (
    PopulationState,
    RecombinationDistribution,
    TypeDistribution,
    TypeSpace,
    Partition,
    solve_exact,
)
from recomb import _kernels
from recomb.ancestral import _entry_arrays
from recomb.dynamics import _VectorField
from recomb.moran import _model_arrays

P = Partition.from_text


def _benchmark_model() -> RecombinationDistribution:
    return RecombinationDistribution.from_probabilities(
        (1, 2, 3), 1.0, {P("1|2,3"): 0.3, P("1,2|3"): 0.5, P("1,3|2"): 0.2}
    )


def _workloads(scale: float):
    """Name -> zero-argument callable returning comparable arrays."""
    d = _benchmark_model()
    space = TypeSpace([2, 2, 2])
    w0 = TypeDistribution.from_pairs(
        space, [((0, 0, 0), 0.55), ((1, 1, 1), 0.3), ((0, 1, 0), 0.15)]
    )
    masks, _, rates = _entry_arrays(d)
    mmasks, mprobs, places, sizes = _model_arrays(d, space)
    z0 = PopulationState.from_distribution(w0, 500)
    start = np.array(Partition.one_block((1, 2, 3)).as_masks(), np.int64)
    target = solve_exact(d, w0, 1.0).to_array()
    w0_arr = w0.to_array()

    big_space = TypeSpace([6, 6, 6])
    field = _VectorField(d, big_space)
    rng = np.random.default_rng(1234)
    vec = rng.random(big_space.cardinality)
    vec /= vec.sum()

    def n(x: float) -> int:
        return max(1, int(x * scale))

    return {
        "stream_uniforms (1M draws)": lambda: _kernels.stream_uniforms(
            7, 0, n(1_000_000)
        ),
        "partition_batch (20k reps)": lambda: _kernels.partition_batch(
            masks, rates, 3, start, 1.0, 11, n(20_000)
        ),
        "moran_batch (N=500, 50 reps)": lambda: _kernels.moran_batch(
            z0.counts, places, sizes, mmasks, mprobs, 1.0, [0.5, 1.0], 13, n(50)
        ),
        "moran_tv_batch (N=500, 50 reps)": lambda: _kernels.moran_tv_batch(
            w0_arr, target, 500, places, sizes, mmasks, mprobs, 1.0, 1.0, 17, n(50)
        ),
        "arg_batch (N=1e4, 20k reps)": lambda: _kernels.arg_batch(
            mmasks, mprobs, 1.0, 3, 10_000, 1.0, 19, n(20_000)
        ),
        "reconstruct_batch (10k reps)": lambda: _kernels.reconstruct_batch(
            mmasks, mprobs, 1.0, 3, 500, 1.0, 23, n(10_000),
            z0.counts, places, sizes,
        ),
        "rhs_dense (216 types, 200 evals)": lambda: np.vstack(
            [field(vec) for _ in range(n(200))]
        ),
    }


def _as_arrays(result) -> list[np.ndarray]:
    if isinstance(result, tuple):
        return [np.asarray(r) for r in result]
    return [np.asarray(result)]


def _run_all(repeats: int, scale: float):
    rows = {}
    for name, fn in _workloads(scale).items():
        fn()  # warmup: JIT compilation / cache load happens here
        times = []
        result = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            result = fn()
            times.append(time.perf_counter() - t0)
        rows[name] = (statistics.median(times), _as_arrays(result))
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--repeats", type=int, default=5, help="timed runs per kernel (default 5)"
    )
    parser.add_argument(
        "--scale", type=float, default=1.0,
        help="workload size multiplier (default 1.0)",
    )
    parser.add_argument(
        "--worker", metavar="NPZ", default=None,
        help="internal: run the workloads and dump results to this file",
    )
    args = parser.parse_args()

    if args.worker:
        rows = _run_all(args.repeats, args.scale)
        payload = {"names": np.array(list(rows))}
        for i, (name, (median, arrays)) in enumerate(rows.items()):
            payload[f"time_{i}"] = np.array(median)
            for j, arr in enumerate(arrays):
                payload[f"arr_{i}_{j}"] = arr
        np.savez(args.worker, **payload)
        return 0

    here_mode = "numba JIT" if _kernels.NUMBA_ACTIVE else "pure Python"
    print(f"this process: {here_mode}; timing {args.repeats} runs per kernel\n")
    rows = _run_all(args.repeats, args.scale)

    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "pure.npz")
        env = dict(os.environ, RECOMB_NUMBA="0")
        subprocess.run(
            [
                sys.executable, os.path.abspath(__file__),
                "--worker", out,
                "--repeats", str(args.repeats),
                "--scale", str(args.scale),
            ],
            check=True,
            env=env,
        )
        pure = np.load(out)
        names = [str(x) for x in pure["names"]]

    width = max(len(n) for n in rows)
    print(f"{'kernel':<{width}}  {'jit (s)':>10}  {'pure (s)':>10}  {'speedup':>8}  agree")
    print("-" * (width + 44))
    ok = True
    for i, name in enumerate(names):
        median, arrays = rows[name]
        pure_time = float(pure[f"time_{i}"])
        exact = "rhs_dense" not in name
        agree = True
        for j, arr in enumerate(arrays):
            other = pure[f"arr_{i}_{j}"]
            if exact:
                agree &= bool(np.array_equal(arr, other))
            else:
                agree &= bool(np.max(np.abs(arr - other)) <= 1e-12)
        ok &= agree
        mark = "yes" if agree else "NO"
        if exact:
            mark += " (bitwise)"
        print(
            f"{name:<{width}}  {median:>10.4f}  {pure_time:>10.4f}  "
            f"{pure_time / max(median, 1e-12):>7.1f}x  {mark}"
        )
    if not ok:
        print("\nERROR: kernel paths disagree", file=sys.stderr)
        return 1
    print("\nall kernels agree across paths")
    return 0


if __name__ == "__main__":
    sys.exit(main())
