"""Benchmark the compiled kernel core against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from attnmem import _kernels_py as pure
from attnmem import kernels

try:
    from attnmem import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    blur_img = rng.random((768, 1024))
    blur_k = kernels.gaussian_kernel1d(3.335)
    small = rng.random((7, 7))
    resize_img = rng.random((56, 56))
    auc_scores = rng.random(224 * 224)
    auc_pos = rng.random(224 * 224) < 0.02

    cases = [
        ("gaussian blur 768x1024 (sigma 3.335)",
         lambda m: m.sep_correlate2d(blur_img, blur_k, False)),
        ("binomial smooth 14x14 (pyramid step)",
         lambda m: m.sep_correlate2d(np.repeat(np.repeat(small, 2, 0), 2, 1),
                                     kernels.BINOMIAL5, True)),
        ("bilinear resize 56x56 -> 224x224",
         lambda m: m.bilinear_resize(resize_img, 224, 224)),
        ("auc ranks on 224x224 map",
         lambda m: m.auc_from_scores(auc_scores, auc_pos)),
    ]

    print(f"{'kernel':45s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_py = timeit(lambda: fn(pure), args.repeats)
        if compiled is None:
            print(f"{name:45s} {t_py * 1e3:9.2f}ms {'n/a':>10s}")
            continue
        t_c = timeit(lambda: fn(compiled), args.repeats)
        print(f"{name:45s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms "
              f"{t_py / t_c:7.1f}x")
    if compiled is None:
        print("\ncompiled extension not built; numpy lane only")
    else:
        print(f"\nactive lane at import time: {kernels.BACKEND}")


if __name__ == "__main__":
    main()
