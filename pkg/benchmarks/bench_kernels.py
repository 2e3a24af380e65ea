"""Timing of the compiled Hermite kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--K 8] [--points 20000] [--repeat 5]``
"""
import argparse
import timeit

import numpy as np

from vpbspec import _hermite_py
from vpbspec.velocity import build_basis

try:
    from vpbspec import _hermite_c
except ImportError:  # extension not built
    _hermite_c = None


def bench(fn, repeat, *args):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--points", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    basis = build_basis(args.K)
    rng = np.random.default_rng(args.seed)
    c = rng.standard_normal((args.points, 3))
    o = rng.standard_normal((args.points, 3))
    cases = {
        "tensor_hermite": lambda m: (m.tensor_hermite, c, args.K, basis.index_map),
        "tensor_hermite_even": lambda m: (m.tensor_hermite_even, c, o, args.K, basis.index_map),
    }
    print(f"K={args.K} dim={basis.dimension} points={args.points}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for name, make in cases.items():
        fn, *a = make(_hermite_py)
        t_py = bench(fn, args.repeat, *a)
        if _hermite_c is None:
            print(f"{name:<22}{1e3 * t_py:>12.2f}{'n/a':>13}")
            continue
        fc, *ac = make(_hermite_c)
        t_c = bench(fc, args.repeat, *ac)
        diff = float(np.max(np.abs(fn(*a) - fc(*ac))))
        print(f"{name:<22}{1e3 * t_py:>12.2f}{1e3 * t_c:>13.2f}{t_py / t_c:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
