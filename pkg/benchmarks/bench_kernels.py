"""Time the JIT kernels against their interpreted twins.

Usage::

    python benchmarks/bench_kernels.py [--quick] [--csv PATH]

Both hot kernels ship two implementations selected at import time (see
``barlab._kernels``); this script forces each backend explicitly on shared
workloads and reports best-of-``repeats`` wall times plus the one-off JIT
compilation cost.  Workloads are seeded and deterministic: boundary matrices
shaped like cubical complexes (a handful of ascending entries per column)
and segment soups taken from genuinely iterated curves.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from barlab._kernels import HAS_NUMBA, count_segment_crossings, reduce_columns
from barlab.twist import TwistMapSpec, iterate_curve, vertical_circle


def boundary_workload(rng: np.random.Generator, n_cols: int):
    """CSR boundary matrix in filtration order, cubical-like sparsity."""
    ptr = [0]
    rows = []
    for j in range(n_cols):
        k = min(int(rng.integers(2, 7)), j)
        if k:
            rows.extend(sorted(rng.choice(j, size=k, replace=False)))
        ptr.append(len(rows))
    return (
        np.asarray(ptr, dtype=np.int64),
        np.asarray(rows, dtype=np.int32),
        n_cols,
    )


def segments_of(poly) -> np.ndarray:
    v = poly.vertices
    closing = v[0] + np.asarray(poly.closure, dtype=float)
    ends = np.vstack([v[1:], closing])
    return np.hstack([v, ends])


def curve_workload(k: int) -> np.ndarray:
    growth = iterate_curve(TwistMapSpec(K=2.0), vertical_circle(0.25), k, tol=0.05)
    return segments_of(growth.final)


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--quick", action="store_true", help="small workloads only")
    ap.add_argument("--csv", type=str, default=None, help="also write results here")
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if not HAS_NUMBA:
        print("numba unavailable (or disabled); timing the numpy twin only\n")

    rows = []

    if HAS_NUMBA:
        # one-off compilation cost, measured on a tiny input with a cold call
        tiny_ptr, tiny_rows, tiny_n = boundary_workload(np.random.default_rng(0), 32)
        t0 = time.perf_counter()
        reduce_columns(tiny_ptr, tiny_rows, tiny_n, force_backend="numba")
        seg = np.array([[0.0, 0.0, 1.0, 1.0]])
        count_segment_crossings(seg, seg, force_backend="numba")
        print(f"jit compilation (both kernels, cold): {time.perf_counter() - t0:.2f}s\n")

    rng = np.random.default_rng(7)
    sizes = [2_000, 10_000] if args.quick else [2_000, 10_000, 40_000]
    for n in sizes:
        ptr, idx, n_rows = boundary_workload(rng, n)
        baseline = None
        for backend in backends:
            repeats = 3 if n <= 10_000 else 1
            dt = best_of(
                lambda: reduce_columns(ptr, idx, n_rows, force_backend=backend),
                repeats,
            )
            rows.append(("reduce_columns", n, backend, dt))
            speed = "" if baseline is None else f"  ({baseline / dt:.1f}x)"
            print(f"reduce_columns  n={n:>6}  {backend:<6} {dt * 1e3:10.2f} ms{speed}")
            if baseline is None:
                baseline = dt

    pairs = [(4, 6)] if args.quick else [(4, 6), (6, 7), (7, 8)]
    for ka, kb in pairs:
        a, b = curve_workload(ka), curve_workload(kb)
        label = a.shape[0] * b.shape[0]
        baseline = None
        for backend in backends:
            dt = best_of(
                lambda: count_segment_crossings(a, b, force_backend=backend), 3
            )
            rows.append(("segment_crossings", label, backend, dt))
            speed = "" if baseline is None else f"  ({baseline / dt:.1f}x)"
            print(
                f"segment_crossings  pairs={label:>10}  {backend:<6} "
                f"{dt * 1e3:10.2f} ms{speed}"
            )
            if baseline is None:
                baseline = dt

    if args.csv:
        lines = ["kernel,size,backend,seconds"]
        lines += ["%s,%d,%s,%.6g" % r for r in rows]
        Path(args.csv).write_text("\n".join(lines) + "\n")
        print(f"\nwrote {args.csv}")


if __name__ == "__main__":
    main()
