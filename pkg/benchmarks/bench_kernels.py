"""Time the numba and numpy kernel paths against each other.

    python3 benchmarks/bench_kernels.py [--quick] [--repeat 5]

Numba compile time is excluded: each kernel is called once before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cvqkd_tamper import FiniteSizeConfig, LinkConfig, _kernels
from cvqkd_tamper.security import _kernel_args


def _best_of(fn, repeat: int) -> float:
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(quick: bool):
    rng = np.random.default_rng(0)
    n = 20_000 if quick else 200_000
    VA, T, xi = rng.uniform(1, 10, n), rng.uniform(0.01, 1, n), rng.uniform(0, 0.2, n)
    args = _kernel_args(LinkConfig(), FiniteSizeConfig())
    n_opt = 5 if quick else 50
    sigmas = np.linspace(0, 0.1, n_opt)
    rows = 200 if quick else 800
    samples = rng.uniform(0, 1, (rows, 1000))
    m = 2560
    x = np.sort(rng.normal(size=m))
    y = rng.integers(0, 4, m)

    return {
        f"key rate, {n} points": lambda impl: impl.kfinite(VA, T, xi, *args),
        f"V_A optimisation x{n_opt}": lambda impl: [impl.optimize_va(0.158, 0.01, s, *args, 1.0, 10.0, 64, 1e-4)
                                                 for s in sigmas],
        f"row moments {rows}x1000": lambda impl: impl.row_moments(samples),
        f"gini split, {m} rows": lambda impl: impl.gini_best_split(x, y, 4, 5),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s}")
    for name, fn in cases(opts.quick).items():
        t_np = _best_of(lambda: fn(_kernels.numpy_impl), opts.repeat)
        t_nb = _best_of(lambda: fn(_kernels.numba_impl), opts.repeat)
        print(f"{name:34s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
