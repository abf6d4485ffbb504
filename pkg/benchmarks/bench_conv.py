#!/usr/bin/env python3
"""Time the convolution lanes against each other.

Runs the forward pass and both gradient kernels for every available lane
over a few representative shapes and prints median wall times plus the
throughput in MMAC/s.  The pure-Python ``loops`` lane exists for
verification, not speed, so it only runs on the smallest shape unless
--everywhere is given.

Usage:
    python3 benchmarks/bench_conv.py [--repeats N] [--everywhere]
"""

import argparse
import statistics
import time

import numpy as np

from slicekit._kernels import ACTIVE_LANE, available_lanes, lane

# (label, batch, c_in, H, W, c_out, ksize)
SHAPES = [
    ("tiny   2x4x8x8    -> 4", 2, 4, 8, 8, 4, 3),
    ("small  4x8x16x16  -> 8", 4, 8, 16, 16, 8, 3),
    ("medium 8x32x16x16 -> 32", 8, 32, 16, 16, 32, 3),
    ("large  8x64x32x32 -> 64", 8, 64, 32, 32, 64, 3),
]


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_shape(label, b, m, h, w, n, k, lanes, repeats):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(b, m, h, w))
    kern = rng.normal(size=(n, m, k, k))
    pad = k // 2
    ho, wo = h, w  # stride 1, same padding
    gy = rng.normal(size=(b, n, ho, wo))
    macs = b * n * m * k * k * ho * wo

    print(f"\n{label}   ({macs / 1e6:.1f} MMAC per forward)")
    print(f"  {'lane':<9} {'forward':>12} {'grad_in':>12} {'grad_k':>12} {'fwd MMAC/s':>12}")
    ref = None
    for name in lanes:
        mod = lane(name)
        reps = 1 if name == "loops" else repeats
        out = mod.conv2d_forward(x, kern, 1, pad)
        if ref is None:
            ref = out
        dev = float(np.abs(out - ref).max())
        t_f = _median_time(lambda: mod.conv2d_forward(x, kern, 1, pad), reps)
        t_gi = _median_time(lambda: mod.conv2d_grad_input(gy, kern, x.shape, 1, pad), reps)
        t_gk = _median_time(lambda: mod.conv2d_grad_kernels(gy, x, kern.shape, 1, pad), reps)
        rate = macs / t_f / 1e6
        note = "" if dev == 0.0 else f"   (max dev vs {lanes[0]}: {dev:.1e})"
        print(f"  {name:<9} {t_f * 1e3:>10.2f}ms {t_gi * 1e3:>10.2f}ms "
              f"{t_gk * 1e3:>10.2f}ms {rate:>12.0f}{note}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats per kernel (median reported)")
    ap.add_argument("--everywhere", action="store_true",
                    help="run the pure-Python loops lane on every shape")
    args = ap.parse_args()

    lanes = available_lanes()
    print(f"lanes available: {', '.join(lanes)}   active at import: {ACTIVE_LANE}")

    for i, (label, *dims) in enumerate(SHAPES):
        use = list(lanes)
        if not args.everywhere and i > 0 and "loops" in use:
            use.remove("loops")
        # deviation column compares against the first lane listed
        use.sort(key=lambda s: (s != "loops", s))
        bench_shape(label, *dims, lanes=use, repeats=args.repeats)


if __name__ == "__main__":
    main()
