"""Benchmark the compiled kernels against the pure-Python fallback.

Runs each hot kernel on an acceptance-scale workload and prints a timing
table. Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from pulsealign import _kernels_py

try:
    from pulsealign import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)

    t = np.cumsum(rng.uniform(0.0005, 0.0015, 600_000))
    anchor, T = float(t.mean()), 0.001
    yield ("allocate_grid (600k timestamps)",
           lambda impl: impl.allocate_grid(t, anchor, T))

    frames = np.cumsum(rng.uniform(0.02, 0.05, 10_000))
    sensor = np.cumsum(rng.uniform(0.0005, 0.0015, 1_000_000))
    yield ("cursor_join (1e4 x 1e6)",
           lambda impl: impl.cursor_join(frames, sensor))

    sos = np.array([[3.17e-5, 0.0, -3.17e-5, -1.9957, 0.99576],
                    [1.0, 0.0, -1.0, -1.9881, 0.98832]])
    x = rng.normal(0, 1, 300_000)
    zi = np.zeros((2, 2))
    yield ("sos_filter (300k samples, 2 biquads)",
           lambda impl: impl.sos_filter(sos, x, zi))

    z = np.cumsum(rng.uniform(0.8, 1.2, 600_000)) * 0.001
    yield ("kalman_track (600k steps)",
           lambda impl: impl.kalman_track(z, float(z[0]), 0.001,
                                          1e-8, 1e-12, 4e-6, 4e-6, 1e-8))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if compiled is None:
        print("compiled extension not built; timing the fallback only\n")

    header = f"{'kernel':<40} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in workloads():
        pure_t = timeit(lambda: call(_kernels_py), args.repeats)
        if compiled is not None:
            comp_t = timeit(lambda: call(compiled), args.repeats)
            print(f"{name:<40} {pure_t * 1e3:>10.1f} {comp_t * 1e3:>14.2f} "
                  f"{pure_t / comp_t:>7.1f}x")
        else:
            print(f"{name:<40} {pure_t * 1e3:>10.1f} {'-':>14} {'-':>8}")


if __name__ == "__main__":
    main()
