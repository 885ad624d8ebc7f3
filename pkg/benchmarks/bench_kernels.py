"""Time the compiled hot kernels against their pure-numpy twins.

Runs each kernel pair on a training-sized workload and prints the median
wall time plus speedup. The compiled path needs numba; without it (or with
MASKFORGE_NO_NUMBA set) only the numpy column is reported.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from maskforge.kernels import (
    NUMBA_ENABLED,
    kl_divergence_numba,
    kl_divergence_numpy,
    ola_accumulate_numba,
    ola_accumulate_numpy,
    repack_accumulate_numba,
    repack_accumulate_numpy,
    sgd_epoch_numba,
    sgd_epoch_numpy,
)


def _median_time(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.median(best))


def _sgd_case(rng):
    sizes = [2570, 1024, 2570]
    n = 64
    Ws = [rng.uniform(-0.05, 0.05, size=(sizes[l + 1], sizes[l]))
          for l in range(2)]
    bs = [np.zeros(sizes[l + 1]) for l in range(2)]
    X = rng.uniform(0.0, 1.0, size=(n, sizes[0]))
    Y = (rng.uniform(size=(n, sizes[-1])) > 0.5).astype(np.float64)
    order = rng.permutation(n)

    def run(fn):
        fn([w.copy() for w in Ws], [b.copy() for b in bs],
           X, Y, order, 0.01, 0)

    return "sgd_epoch [2570,1024,2570] x64", run


def _ola_case(rng):
    frames = rng.standard_normal((2000, 2048))
    window = np.hanning(2048)
    out_len = 512 * 1999 + 2048

    def run(fn):
        fn(frames, window, 512, out_len)

    return "ola_accumulate 2000x2048 hop 512", run


def _repack_case(rng):
    patches = rng.uniform(0.0, 1.0, size=(3000, 257, 10))
    offsets = np.arange(3000, dtype=np.int64)

    def run(fn):
        fn(patches, offsets, 3009)

    return "repack_accumulate 3000x257x10", run


def _kl_case(rng):
    V = rng.uniform(0.01, 1.0, size=(1285, 2000))
    V_hat = rng.uniform(0.01, 1.0, size=(1285, 2000))

    def run(fn):
        fn(V, V_hat)

    return "kl_divergence_sum 1285x2000", run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions per kernel (median reported)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = [
        (_sgd_case(rng), sgd_epoch_numpy, sgd_epoch_numba),
        (_ola_case(rng), ola_accumulate_numpy, ola_accumulate_numba),
        (_repack_case(rng), repack_accumulate_numpy, repack_accumulate_numba),
        (_kl_case(rng), kl_divergence_numpy, kl_divergence_numba),
    ]

    if not NUMBA_ENABLED:
        print("numba path disabled; timing numpy twins only")
    print(f"{'kernel':<36} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for (label, run), fn_numpy, fn_numba in cases:
        t_numpy = _median_time(lambda: run(fn_numpy), args.repeats)
        if NUMBA_ENABLED:
            run(fn_numba)  # warm-up compile, excluded from timing
            t_numba = _median_time(lambda: run(fn_numba), args.repeats)
            ratio = t_numpy / t_numba if t_numba > 0 else float("inf")
            print(f"{label:<36} {t_numpy * 1e3:>8.1f}ms {t_numba * 1e3:>8.1f}ms "
                  f"{ratio:>7.1f}x")
        else:
            print(f"{label:<36} {t_numpy * 1e3:>8.1f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
