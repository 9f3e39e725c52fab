"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--sizes 64,256,1024,2000] [--repeat 5]

Prints best-of-``repeat`` wall time per call and the maximum absolute
difference between the two backends' outputs.
"""
import argparse
import sys
import timeit

import numpy as np

from ranknorm import _backend
from ranknorm.rng import seeded_rng


def _cases(n):
    x = seeded_rng(0, f"bench/{n}").standard_normal(n)
    lin = np.linspace(0.0, 1.0, n)
    X = x.reshape(-1, 1).repeat(8, axis=1)
    mu, sigma = X.mean(axis=0), X.std(axis=0) + 1e-6
    return {
        "softsort": lambda b: b.softsort_column(x, lin, 0.1, False)[0],
        "sinkhorn": lambda b: b.sinkhorn_column(x, lin, 0.1, 15, 1e-30, False)[0],
        "qnorm_map": lambda b: b.qnorm_map(X, mu, sigma, 1e-6),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="64,256,1024,2000")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    try:
        compiled = _backend.load("cython")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    numpy_b = _backend.load("numpy")

    print(f"{'kernel':<10} {'n':>6} {'cython s':>11} {'numpy s':>11} {'speedup':>8} {'max |diff|':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, fn in _cases(n).items():
            t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
            t_n = min(timeit.repeat(lambda: fn(numpy_b), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(fn(compiled) - fn(numpy_b))))
            print(f"{name:<10} {n:>6} {t_c:>11.6f} {t_n:>11.6f} {t_n / t_c:>7.2f}x {diff:>11.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
