"""Compiled vs pure-numpy branch inversion.

    python3 benchmarks/bench_kernels.py [--size 200000] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from exterior_expansion import _kernels_py

try:
    from exterior_expansion import _kernels as _compiled
except ImportError:
    _compiled = None

CASES = {
    # name: (code, n, param, w_lo, w_hi, increasing, xi range)
    "MA": (_kernels_py.MA, 3.0, 1.0, 1e-6, 50.0, True, (-0.9, 100.0)),
    "Inverse": (_kernels_py.INVERSE, 3.0, 3.0, 2.0, 50.0, True, (-3.9, 100.0)),
    "SPL": (_kernels_py.SPL, 3.0, 0.0, math.tan(-math.pi / 4) + 1e-9, math.tan(math.pi / 4) - 1e-9,
            True, (-1.9, 1.9)),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(1)
    print(f"{'case':10s} {'numpy [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s} {'max |dw|':>10s}")
    for name, (code, n, p, lo, hi, inc, (a, b)) in CASES.items():
        xi = rng.uniform(a, b, args.size)
        f_py = lambda: _kernels_py.invert_branch(code, n, p, xi, lo, hi, inc)
        t_py = min(timeit.repeat(f_py, number=1, repeat=args.repeat))
        if _compiled is None:
            print(f"{name:10s} {t_py:12.4f} {'n/a':>13s}")
            continue
        f_c = lambda: _compiled.invert_branch(code, n, p, xi, lo, hi, inc)
        t_c = min(timeit.repeat(f_c, number=1, repeat=args.repeat))
        diff = np.max(np.abs(f_py() - f_c()))
        print(f"{name:10s} {t_py:12.4f} {t_c:13.4f} {t_py / t_c:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
