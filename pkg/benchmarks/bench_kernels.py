"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 5]

Both backends are imported directly, so the script does not depend on the
``DSIGMA_PURE_PYTHON`` switch.  Outputs are checked for equality before any
timing is reported.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from dsigma import _pykernels

try:
    from dsigma import _ckernels
except ImportError:
    _ckernels = None


def _cases(n: int, rng: np.random.Generator):
    offsets = np.stack([rng.integers(0, np.arange(n) + 1) for _ in range(20)])
    perm = rng.permutation(n)
    # random geometric-ish graph: each node linked to a few nearby indices
    rows = [np.unique(np.clip(i + rng.integers(-5, 6, size=4), 0, n - 1)) for i in range(n)]
    rows = [r[r != i] for i, r in enumerate(rows)]
    indptr = np.concatenate([[0], np.cumsum([r.size for r in rows])])
    indices = np.concatenate(rows)
    return {
        "rim_insert (20 x n)": lambda k: k.rim_insert(offsets),
        "count_inversions": lambda k: k.count_inversions(perm),
        "bfs_order": lambda k: k.bfs_order(indptr, indices, 0),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=2000, help="permutation / graph size")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (best is reported)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"n={args.n}  repeat={args.repeat}")
    print(f"{'kernel':<22}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, run in _cases(args.n, rng).items():
        a, b = run(_pykernels), run(_ckernels)
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 2
        t_py = min(timeit.repeat(lambda: run(_pykernels), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: run(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<22}{t_py * 1e3:>14.3f}{t_c * 1e3:>16.3f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
