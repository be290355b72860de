#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Sizes mirror a realistic mining/denoising workload: one minute of 16 kHz
audio for the framing kernel and the matching spectrogram shapes for the
rest. Run directly: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from farvox import kernels


def timeit(fn, args, repeat):
    fn(*args)  # warmup (and JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seconds", type=float, default=60.0, help="audio length")
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba not importable: only the numpy path can run")

    sr = 16000
    n = int(args.seconds * sr)
    rng = np.random.default_rng(0)
    x = rng.normal(size=n)

    n_fft, hop = 1024, 256
    n_frames = kernels.frame_count(n, hop)
    frames = rng.normal(size=(n_frames, n_fft))
    window = np.hanning(n_fft)
    db = rng.normal(size=(n_frames, n_fft // 2 + 1))
    mask = rng.uniform(size=(n_frames, n_fft // 2 + 1))

    cases = [
        ("frame_rms (25ms/10ms VAD)", "_frame_rms", (x, 400, 160)),
        ("overlap_add (istft)", "_overlap_add", (frames, window, hop)),
        ("ema_time (non-stationary gate)", "_ema_time", (db, 0.95)),
        ("box_mean 3x3 (mask smoothing)", "_box_mean", (mask, 3, 3)),
    ]

    print(f"audio: {args.seconds:.0f}s at {sr} Hz ({n} samples, {n_frames} frames)")
    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, stem, case_args in cases:
        t_numpy = timeit(getattr(kernels, stem + "_numpy"), case_args, args.repeat)
        if kernels.HAVE_NUMBA:
            t_numba = timeit(getattr(kernels, stem + "_numba"), case_args, args.repeat)
            print(
                f"{label:34s} {t_numpy * 1e3:8.2f}ms {t_numba * 1e3:8.2f}ms "
                f"{t_numpy / t_numba:7.1f}x"
            )
        else:
            print(f"{label:34s} {t_numpy * 1e3:8.2f}ms {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
