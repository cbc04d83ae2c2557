"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 5]
"""
import argparse
import json
import timeit

import numpy as np

from vstatns import _kernels as hk
from vstatns._accel import HAVE_NUMBA


def cases(n, rng):
    x = rng.normal(size=n)
    a = rng.normal(size=(n, n))
    w = np.ascontiguousarray(a + a.T)
    u = np.arange(1, n + 1) / n - 0.5
    k = np.maximum(0.0, 1 - (u / 0.2) ** 2)
    ar = np.full(n * 50, 0.6)
    s = np.ones(n * 50)
    e = rng.normal(size=n * 50)
    return {
        "pair_sum[product]": (lambda: hk.pair_sum_numba(x, w, 0, 0.0, False),
                              lambda: hk.pair_sum_numpy(x, w, 0, 0.0, False)),
        "pair_sum[variance]": (lambda: hk.pair_sum_numba(x, w, 1, 0.0, False),
                               lambda: hk.pair_sum_numpy(x, w, 1, 0.0, False)),
        "local_linear_sums[variance]": (lambda: hk.local_linear_sums_numba(x, k, u, 1, 0.0),
                                        lambda: hk.local_linear_sums_numpy(x, k, u, 1, 0.0)),
        "ar1_recursion": (lambda: hk.ar1_recursion_numba(ar, s, e, 0.0),
                          lambda: hk.ar1_recursion_numpy(ar, s, e, 0.0)),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", action="store_true", help="print machine-readable results")
    args = p.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    rows = []
    for name, (fast, slow) in cases(args.n, rng).items():
        fast()  # compile outside the timed region
        tf = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        ts = min(timeit.repeat(slow, number=1, repeat=args.repeat))
        rows.append({"kernel": name, "n": args.n, "numba_s": tf, "numpy_s": ts, "speedup": ts / tf})
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':30s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['kernel']:30s} {1e3 * r['numba_s']:11.3f} {1e3 * r['numpy_s']:11.3f} {r['speedup']:8.2f}")


if __name__ == "__main__":
    main()
