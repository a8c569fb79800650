#!/usr/bin/env python3
"""Wall-time comparison of the two filter pruners on one weight matrix.

Flattens a random bank of filters and times fp_backward against fp_omp for
a sweep of elimination counts.  Backward elimination scores every remaining
filter with closed-form error increases on a downdated Gram inverse, so it
should beat the orthogonal-matching-pursuit pruner whenever few filters are
removed from a wide layer.

Example:
    python3 scripts/time_backward_vs_omp.py --out-channels 256 --in-channels 64
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from convprune import ConvLayer, flatten_filters, fp_backward, fp_omp


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-channels", type=int, default=256)
    p.add_argument("--in-channels", type=int, default=64)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--prune", default="1,5,16,64,128",
                   help="comma-separated numbers of filters to eliminate")
    p.add_argument("--repeats", type=int, default=3,
                   help="best-of-N timing per cell")
    p.add_argument("--seed", type=int, default=0)
    return p.parse_args(argv)


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    args = parse_args(argv)
    counts = [int(v) for v in args.prune.split(",")]
    n = args.out_channels
    if any(not 0 < c < n for c in counts):
        sys.exit(f"prune counts must be in (0, {n})")

    rng = np.random.default_rng(args.seed)
    layer = ConvLayer(
        rng.standard_normal((n, args.in_channels, args.kernel, args.kernel))
    )
    filters = flatten_filters(layer)
    rows = args.in_channels * args.kernel**2
    print(f"filter bank: {rows} x {n} (in={args.in_channels}, "
          f"k={args.kernel}), best of {args.repeats} runs\n")
    print(f"{'eliminate':>9} {'backward':>12} {'omp':>12} {'ratio':>7}")
    for count in counts:
        beta = count / n
        t_back = best_of(lambda: fp_backward(filters, beta), args.repeats)
        t_omp = best_of(lambda: fp_omp(filters, beta), args.repeats)
        print(f"{count:9d} {t_back * 1e3:10.1f}ms {t_omp * 1e3:10.1f}ms "
              f"{t_back / t_omp:7.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
