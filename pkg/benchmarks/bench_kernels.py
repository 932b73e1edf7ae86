"""Timings: compiled kernels vs the numpy fallback.

Runs every shared kernel on plate-sized inputs with both backends and
prints the per-call times plus speedup. Handy after touching _native.pyx
or to decide whether a machine without a compiler is usable.

    python3 benchmarks/bench_kernels.py [--repeats N] [--width W --height H]
"""

import argparse
import time

import numpy as np

from anpr.kernels import pure

try:
    from anpr.kernels import _native as native
except ImportError:
    native = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(h, w, rng):
    gray = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    mag = rng.random((h, w)) * 120.0
    dbin = rng.integers(0, 4, size=(h, w), dtype=np.uint8)
    mask = rng.random((h, w)) < 0.5
    strong = mask & (rng.random((h, w)) < 0.1)
    a = bytes(rng.integers(48, 91, size=400).tolist())
    b = bytes(rng.integers(48, 91, size=400).tolist())
    return [
        ("bilateral 9/70/70", lambda m: m.bilateral(gray, 9, 70.0, 70.0)),
        ("canny_nms", lambda m: m.canny_nms(mag, dbin)),
        ("hysteresis", lambda m: m.hysteresis(mask, strong)),
        ("erode 10x1", lambda m: m.erode_rect(mask, 10, 1)),
        ("dilate 1x20", lambda m: m.dilate_rect(mask, 1, 20)),
        ("label 8-conn", lambda m: m.label(mask, 8)),
        ("lcs 400x400", lambda m: m.lcs_len(a, b)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--width", type=int, default=400)
    ap.add_argument("--height", type=int, default=100)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = build_cases(args.height, args.width, rng)

    print(f"input {args.width}x{args.height}, best of {args.repeats}")
    header = f"{'kernel':<18} {'pure':>10} {'native':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_pure = best_of(lambda: call(pure), args.repeats)
        if native is None:
            print(f"{name:<18} {t_pure * 1e3:>8.2f}ms {'n/a':>10} {'':>8}")
            continue
        t_nat = best_of(lambda: call(native), args.repeats)
        print(
            f"{name:<18} {t_pure * 1e3:>8.2f}ms {t_nat * 1e3:>8.2f}ms "
            f"{t_pure / t_nat:>7.1f}x"
        )
    if native is None:
        print("\ncompiled backend unavailable; showing the fallback only")


if __name__ == "__main__":
    main()
