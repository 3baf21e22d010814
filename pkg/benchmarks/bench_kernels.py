"""Compare the compiled and numpy Kraus sandwich kernels.

Run: python3 benchmarks/bench_kernels.py --repeats 200
"""
import argparse
import time

import numpy as np

from qtamper import _kernels
from qtamper.randomness import make_rng, random_kraus


def timed(fn, kraus, x, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = fn(kraus, x)
    return (time.perf_counter() - t0) * 1000.0 / repeats, out


def classical_kraus(din, dout):
    # one nonzero per operator, as in measurement and relabeling channels
    ops = np.zeros((din, dout, din), dtype=complex)
    for i in range(din):
        ops[i, i % dout, i] = 1.0
    return ops


def main():
    p = argparse.ArgumentParser()
    p.add_argument('--repeats', type=int, default=200)
    args = p.parse_args()
    if _kernels.sandwich_numba is None:
        print('numba unavailable (or QTAMPER_NUMBA=0); nothing to compare')
        return
    rng = make_rng(0)
    cases = [
        ('dense 4 ops, 8 -> 8, rest 16', random_kraus(rng, 8, 8, 4), (8, 16, 8, 16)),
        ('dense 2 ops, 2 -> 4, rest 64', random_kraus(rng, 2, 4, 2), (2, 64, 2, 64)),
        ('classical 16 -> 2, rest 8', classical_kraus(16, 2), (16, 8, 16, 8)),
        ('classical 4 -> 4, rest 32', classical_kraus(4, 4), (4, 32, 4, 32)),
    ]
    print(f"{'case':<32} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for name, kraus, shape in cases:
        x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        _kernels.sandwich_numba(kraus, x)  # compile outside the timing
        t_np, a = timed(_kernels.sandwich_numpy, kraus, x, args.repeats)
        t_nb, b = timed(_kernels.sandwich_numba, kraus, x, args.repeats)
        print(f'{name:<32} {t_np:>10.4f} {t_nb:>10.4f} {t_np / max(t_nb, 1e-9):>7.2f}x '
              f'{np.max(np.abs(a - b)):>10.2e}')


if __name__ == '__main__':
    main()
