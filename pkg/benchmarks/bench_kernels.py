"""Compare the compiled and pure-Python capital kernels.

    python3 benchmarks/bench_kernels.py [--rows R] [--rounds N] [--repeat K]

Prints best-of-K wall time per kernel for each backend and the speedup.
The pure-Python backend loops in the interpreter, so the default size is
kept small; results scale linearly in rows x rounds.
"""

import argparse
import timeit

import numpy as np

from gtslln import _kernels_py, kernels

try:
    from gtslln import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def cases(rows, rounds, rng):
    inc = rng.normal(size=(rows, rounds)) * 1e-3
    fac = rng.uniform(-0.4, 0.4, size=(rows, rounds))
    t = np.abs(rng.laplace(size=(rows, rounds))) * 5
    cap = 1.0 + np.cumsum(rng.normal(size=(rows, rounds + 1)) * 0.05, axis=1)
    return {
        "kahan_cumsum": lambda impl: kernels.kahan_cumsum(1.0, inc, impl=impl),
        "product_capital": lambda impl: kernels.product_capital(1.0, fac, impl=impl),
        "trapezoid_sums": lambda impl: kernels.trapezoid_sums(t, 2.0, impl=impl),
        "upcrossing_overlay": lambda impl: kernels.upcrossing_overlay(cap, 0.9, 1.1, 0.9, impl=impl),
        "upcrossing_count": lambda impl: kernels.upcrossing_count(cap, 0.9, 1.1, impl=impl),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--rounds", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _compiled is None:
        print("compiled backend not built; only the Python backend is timed")
    print(f"rows={args.rows} rounds={args.rounds} (best of {args.repeat})")
    print(f"{'kernel':<20}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name, fn in cases(args.rows, args.rounds, np.random.default_rng(0)).items():
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if _compiled is None:
            print(f"{name:<20}{'-':>12}{py:>12.4g}{'-':>10}")
            continue
        cy = min(timeit.repeat(lambda: fn(_compiled), number=1, repeat=args.repeat))
        assert np.array_equal(fn(_compiled), fn(_kernels_py)), name
        print(f"{name:<20}{cy:>12.4g}{py:>12.4g}{py / cy:>10.1f}x")


if __name__ == "__main__":
    main()
