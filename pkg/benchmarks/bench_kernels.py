"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each kernel is called once untimed so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from lowlight_bench import kernels


def best_of(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    img = rng.uniform(0, 255, (240, 320))
    tmpl = img[100:132, 140:172].copy()
    rows = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    return {
        "ncc_scores r=20 32x32": ("ncc_scores", (img, tmpl, 140, 100, 20)),
        "fft_rows 64x64": ("fft_rows", (rows, False)),
        "box_blur r=2 240x320": ("box_blur", (img, 2)),
        "bilinear_crop 64x64": ("bilinear_crop", (img, 160.3, 120.7, 80.0, 80.0, 64, 64)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<24} {'numba ms':>9} {'numpy ms':>9} {'speedup':>8}")
    for label, (name, call_args) in cases(rng).items():
        fast = getattr(kernels, f"{name}_numba")
        slow = getattr(kernels, f"{name}_numpy")
        a, b = fast(*call_args), slow(*call_args)
        assert np.allclose(a, b, atol=1e-9, equal_nan=True), label
        t_nb = best_of(fast, call_args, args.repeat)
        t_np = best_of(slow, call_args, args.repeat)
        print(f"{label:<24} {1e3 * t_nb:9.3f} {1e3 * t_np:9.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
