"""Timing comparison of the two channel-moment kernel backends.

The compiled extension and the pure numpy kernel implement the same
function; this script times both on identical argument batches sized like
the grids a solver sweep produces, and checks they agree while at it.

Run from the repository root:

    python benchmarks/bench_kernels.py [--sizes 1000,10000,100000]
"""

import argparse
import time

import numpy as np

import netent.core._kernels_py as kpy

try:
    import netent.core._kernels as kcy
except ImportError:
    kcy = None

KINDS = [("linear", kpy.KIND_LINEAR), ("relu", kpy.KIND_RELU),
         ("hardtanh", kpy.KIND_HARDTANH)]


def make_batch(n, seed):
    """Argument grids shaped like one quadrature pass of a solve.

    A and tau are scalar per call in the kernel contract; B and omega are
    the flattened quadrature grids.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    a = 7.5
    tau = 0.4
    b = rng.normal(0.0, np.sqrt(a * (1.0 + a * tau)), size=n)
    omega = rng.normal(0.0, 1.0, size=n)
    return a, tau, b, omega


def run(fn, kind, batch, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(kind, *batch)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if kcy is None:
        print("compiled extension not available; timing numpy only")
    header = f"{'kind':>9} {'n':>8} {'numpy':>12} {'cython':>12} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    print("-" * len(header))
    for name, kind in KINDS:
        for n in sizes:
            batch = make_batch(n, seed=12345)
            t_py, out_py = run(kpy.mid_moments, kind, batch, args.repeats)
            line = f"{name:>9} {n:>8d} {t_py * 1e3:>10.2f}ms"
            if kcy is not None:
                t_cy, out_cy = run(kcy.mid_moments, kind, batch,
                                   args.repeats)
                diff = max(float(np.max(np.abs(np.asarray(p) - np.asarray(c))))
                           for p, c in zip(out_py, out_cy))
                line += f" {t_cy * 1e3:>10.2f}ms {t_py / t_cy:>7.2f}x {diff:>10.2e}"
            print(line)


if __name__ == "__main__":
    main()
