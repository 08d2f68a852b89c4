"""Compare the numba and numpy backends of the three scaling loops.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from subalg import _kernels
from subalg import scaling as S
from subalg.matcore import haar_unitary


def _cases(rng):
    return [
        ("unital n=k=2 eps=1e-8", lambda b, x: S.sinkhorn_unital(x, 2, 2, 1e-8, backend=b),
         [haar_unitary(4, rng) for _ in range(50)]),
        ("unital n=k=3 eps=1e-8", lambda b, x: S.sinkhorn_unital(x, 3, 3, 1e-8, backend=b),
         [haar_unitary(9, rng) for _ in range(20)]),
        ("qls n=3 eps=1e-8", lambda b, x: S.sinkhorn_qls(x, 1e-8, backend=b),
         [S.random_qls_grid(3, rng) for _ in range(50)]),
        ("qls n=4 eps=1e-6", lambda b, x: S.sinkhorn_qls(x, 1e-6, backend=b),
         [S.random_qls_grid(4, rng) for _ in range(20)]),
        ("blocks n=4 k=3 eps=1e-8", lambda b, x: S.sinkhorn_blocks(x, 1e-8, backend=b),
         [S.random_block_psd(4, 3, rng) for _ in range(20)]),
    ]


def time_case(fn, backend, inputs, repeat):
    fn(backend, inputs[0])  # compile / warm caches
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        steps = sum(fn(backend, x)[1].iterations for x in inputs)
        best = min(best, time.perf_counter() - t0)
    return best, steps


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    backends = _kernels.available()
    if "numba" not in backends:
        print("numba is not installed; only the numpy backend is available")
    rng = np.random.default_rng(args.seed)
    header = f"{'case':28s}" + "".join(f"{b + ' [ms]':>14s}" for b in backends) + f"{'steps':>8s}"
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, fn, inputs in _cases(rng):
        times = {}
        for b in backends:
            times[b], steps = time_case(fn, b, inputs, args.repeat)
        line = f"{name:28s}" + "".join(f"{times[b] * 1e3:14.2f}" for b in backends) + f"{steps:8d}"
        if len(backends) == 2:
            line += f"{times['numpy'] / times['numba']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
