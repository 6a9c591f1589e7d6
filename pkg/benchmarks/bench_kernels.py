"""Compare the compiled kernels with the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best-of-``repeat`` wall time per backend and checks that
both backends return the same result.
"""

import argparse
import timeit

import numpy as np

from spongedim import _lattice, _tree

try:
    from spongedim import _kernels
except ImportError:
    _kernels = None


def expand_case(n, d, mode, seed=0):
    rng = np.random.default_rng(seed)
    keys = _tree.mix(np.arange(n, dtype=np.uint64) * np.uint64(7919))
    q = rng.uniform(0.1, 1.0, n)
    p = rng.uniform(0.3, 0.9, d)
    masks = (rng.random((4, d)) < 0.5).astype(np.uint8)
    cum = np.cumsum([0.1, 0.2, 0.3, 0.4])
    w = rng.uniform(0.5, 2.0, d)
    return (keys, q, mode, p, cum, masks, w, _tree.salts(d, _tree.SALT_CHILD), _tree.salts(d + 1, _tree.SALT_UNIF), 10**9)


def lattice_case(d, steps, seed=0):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.2, 1.5, 3)
    phi = np.log(rng.uniform(0.1, 1.0, d))
    beta = rng.uniform(0.0, 1.0, (3, 2))
    sizes = np.array([3, 2], dtype=np.int64)
    proj = np.stack([rng.integers(0, s, d) for s in sizes]).astype(np.int64)
    proj[0, :3], proj[1, :2] = np.arange(3), np.arange(2)
    return (1 / steps, np.zeros(d), np.zeros(d, np.int64), np.full(d, steps, np.int64), steps, alpha, phi, beta, proj, sizes)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return abs(a - b) <= 1e-12 * max(1.0, abs(a))
    return np.array_equal(np.asarray(a), np.asarray(b))


CASES = [
    ("expand  n=1e4  d=6  independent", "expand", expand_case(10_000, 6, 0)),
    ("expand  n=1e5  d=6  independent", "expand", expand_case(100_000, 6, 0)),
    ("expand  n=1e5  d=12 mixture", "expand", expand_case(100_000, 12, 1)),
    ("lattice d=5  1/20 grid", "lattice_argmax", lattice_case(5, 20)),
    ("lattice d=6  1/24 grid", "lattice_argmax", lattice_case(6, 24)),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = {"expand": _tree.expand, "lattice_argmax": _lattice.lattice_argmax}
    print(f"{'case':34s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}  match")
    for name, kernel, case in CASES:
        t_py = min(timeit.repeat(lambda: py[kernel](*case), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:34s} {1e3 * t_py:11.2f} {'n/a':>12s}")
            continue
        fast = getattr(_kernels, kernel)
        t_cy = min(timeit.repeat(lambda: fast(*case), number=1, repeat=args.repeat))
        ok = same(py[kernel](*case), fast(*case))
        print(f"{name:34s} {1e3 * t_py:11.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:7.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
