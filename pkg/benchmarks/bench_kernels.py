"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np
from scipy import sparse

from grlstop import _fallback

try:
    from grlstop import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    # knee scan over a ranking whose relevant documents thin out slowly
    n = 4000
    labels = rng.random(n) < np.linspace(0.3, 0.01, n)
    gains = np.cumsum(labels).astype(np.float64)
    yield "knee_scan (N=4000, no stop)", lambda k: k.knee_scan(gains, 150, 1e9)

    X = sparse.random(2000, 3000, density=0.01, random_state=rng, format="csr")
    idx, ptr = X.indices.astype(np.int32), X.indptr.astype(np.int32)
    y = (rng.random(2000) < 0.05).astype(np.float64)
    sw = np.where(y > 0, 1.0, 0.05)
    params = rng.normal(scale=0.1, size=3001)
    yield "logistic_loss_grad (2000x3000)", lambda k: k.logistic_loss_grad(X.data, idx, ptr, 3000, y, sw, params, 1.0)

    shape = (100, 20)
    r, v = rng.normal(size=shape), rng.normal(size=shape)
    d = (rng.random(shape) < 0.05).astype(np.float64)
    lv, ld = rng.normal(size=20), np.zeros(20)
    yield "gae (100 steps x 20 envs)", lambda k: k.gae(r, v, d, lv, ld, 0.99, 0.95)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':34s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speed-up':>9s}")
    for name, fn in cases(np.random.default_rng(0)):
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:34s} {t_py:12.3f} {'-':>12s} {'-':>9s}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {t_py:12.3f} {t_cy:12.3f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
