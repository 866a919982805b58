"""Time the numba-compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Both paths are imported directly, so the CMZDRIL_DISABLE_NUMBA flag does not
matter here. Compile time is excluded (one warm-up call per kernel).
"""

import argparse
import timeit

import numpy as np

from cmzdril import kernels
from cmzdril._accel import HAS_NUMBA, njit


def cases(rng):
    centers = rng.uniform(0, 20, size=(8, 2))
    radii = rng.uniform(0.5, 1.5, size=8)
    a, b = rng.normal(size=(120, 2)), rng.normal(size=(100, 2))
    r, v = rng.normal(size=2048), rng.normal(size=2048)
    d = (rng.random(2048) < 0.02).astype(float)
    return {
        "lidar (16 beams, 8 circles)": ("lidar", (10.0, 10.0, 0.3, centers, radii, 16, 10.0)),
        "frechet (120 x 100)": ("frechet", (a, b)),
        "gae (2048 steps)": ("gae", (r, v, d, 0.0, 0.99, 0.95)),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args(argv)
    if not HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s}")
    for label, (name, inputs) in cases(rng).items():
        fast = njit(getattr(kernels, f"{name}_loop"))
        slow = getattr(kernels, f"{name}_numpy")
        np.testing.assert_allclose(fast(*inputs), slow(*inputs), atol=1e-12)
        t_np = min(timeit.repeat(lambda: slow(*inputs), number=args.repeat, repeat=3)) / args.repeat
        t_nb = min(timeit.repeat(lambda: fast(*inputs), number=args.repeat, repeat=3)) / args.repeat
        print(f"{label:30s} {t_np * 1e6:10.1f} {t_nb * 1e6:10.1f} {t_np / t_nb:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
