"""Compare the compiled and pure-numpy kernels.

    python benchmarks/bench_kernels.py [--p 500] [--repeat 5]

Times ``iht_step`` and ``hard_threshold`` in isolation, then a full
50-batch Gaussian stream with each backend patched into the engine, and
reports how closely the two backends' final estimates agree.
"""
import argparse
import statistics
import time
import timeit

import numpy as np

from streamsparse import kernels
from streamsparse.engine import IhtConfig, process_stream
from streamsparse.glm import GlmFamily
from streamsparse.simdata import DesignSpec, StreamSpec, SyntheticStream, TruthSpec


def time_call(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_inputs(p, s, rng):
    beta = np.zeros(p)
    beta[rng.choice(p, s, replace=False)] = rng.standard_normal(s)
    a = rng.standard_normal((2 * p, p))
    hess = a.T @ a
    return beta, rng.standard_normal(p), rng.standard_normal(p), hess


def full_stream(backend, p, batches):
    mod = kernels.get_backend(backend)
    saved = kernels.iht_step
    kernels.iht_step = mod.iht_step
    try:
        spec = StreamSpec(DesignSpec(p), TruthSpec(p, 5, value=0.5), GlmFamily.gaussian(), 200, batches, 0)
        out = []
        t0 = time.perf_counter()
        process_stream(SyntheticStream(spec), spec.family, IhtConfig(), out.append)
        return time.perf_counter() - t0, out[-1].beta_hat
    finally:
        kernels.iht_step = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=500)
    ap.add_argument("--batches", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        kernels.get_backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(0)
    print(f"p = {args.p}")
    print(f"{'kernel':<34}{'cython':>12}{'python':>12}{'speedup':>10}")
    for s in (5, 50, args.p // 2):
        beta, grad, inter, hess = kernel_inputs(args.p, s, rng)
        times = {}
        for name in ("cython", "python"):
            step = kernels.get_backend(name).iht_step
            times[name] = time_call(lambda: step(beta, grad, inter, hess, 1e-3, 0.1), args.repeat, 200)
        label = f"iht_step (|supp beta| = {s})"
        print(f"{label:<34}{times['cython'] * 1e6:>10.1f}us{times['python'] * 1e6:>10.1f}us"
              f"{times['python'] / times['cython']:>9.2f}x")
    z = rng.standard_normal(args.p)
    times = {n: time_call(lambda: kernels.get_backend(n).hard_threshold(z, 0.5), args.repeat, 2000)
             for n in ("cython", "python")}
    print(f"{'hard_threshold':<34}{times['cython'] * 1e6:>10.1f}us{times['python'] * 1e6:>10.1f}us"
          f"{times['python'] / times['cython']:>9.2f}x")

    runs = {n: [full_stream(n, args.p, args.batches) for _ in range(3)] for n in ("cython", "python")}
    secs = {n: statistics.median(t for t, _ in r) for n, r in runs.items()}
    a, b = runs["cython"][0][1], runs["python"][0][1]
    same_support = np.array_equal(a != 0, b != 0)
    gap = float(np.max(np.abs(a - b)))
    label = f"full stream ({args.batches} batches)"
    print(f"{label:<34}{secs['cython']:>11.3f}s{secs['python']:>11.3f}s{secs['python'] / secs['cython']:>9.2f}x")
    # Summation order inside Hess @ beta differs, so agreement is to rounding.
    print(f"final estimates: same support {same_support}, max |difference| {gap:.1e}")


if __name__ == "__main__":
    main()
