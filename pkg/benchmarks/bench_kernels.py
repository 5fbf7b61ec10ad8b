"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is run on both backends, checked for equal output and timed with
``timeit`` (best of ``--repeat``).
"""
import argparse
import timeit

import numpy as np

from al_lab import _fallback

try:
    from al_lab import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    n = 20_000
    xs = np.sort(rng.random(n))
    signs = np.where(rng.random(n) < 0.2, 1.0, -1.0)
    queries = rng.random(200_000)
    yield "knn_scores_1d n=2e4 q=2e5 k=5", "knn_scores_1d", (xs, signs, 5, queries), {}

    view = np.full(2_000_000, -1, dtype=np.int8)
    idx = rng.choice(len(view), 50_000, replace=False)
    view[idx] = (rng.random(len(idx)) < 0.2).astype(np.int8)
    yield "scan_open_points m=2e6 k'=2", "scan_open_points", (view, 2), {}

    lattice = np.unique(np.concatenate([np.linspace(0, 1, 128), rng.random(64)]))
    fixed = np.array([0.31, 0.33])
    common = (_fallback.HIST, 1, 0.25, 0.0, True, np.array([0.3]), 0.2)
    yield "gn_min histogram L=192 a=2", "gn", (fixed, lattice, 2) + common, {}
    common = (_fallback.KNN, 3, 1.0, 0.0, True, np.array([0.3]), 0.2)
    yield "gn_min knn L=192 a=3", "gn", (fixed, lattice, 3) + common, {}


def call(mod, name, args):
    if name == "gn":
        fixed, lattice = args[0], args[1]
        if mod is _fallback:
            return mod.gn_min(fixed[:, None], lattice[:, None], *args[2:])
        return mod.gn_min_1d(fixed, lattice, *args[2:8], float(args[8][0]), args[9])
    return getattr(mod, name)(*args)


def same(a, b):
    if isinstance(a, tuple):
        return np.isclose(a[0], b[0], atol=1e-12)
    return np.allclose(np.asarray(a), np.asarray(b), atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<34}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}  equal")
    for label, name, cargs, _ in cases(rng):
        t = {}
        out = {}
        for tag, mod in (("numpy", _fallback), ("cython", _kernels)):
            out[tag] = call(mod, name, cargs)
            t[tag] = min(timeit.repeat(lambda: call(mod, name, cargs), number=1, repeat=args.repeat))
        print(f"{label:<34}{1e3 * t['numpy']:>12.2f}{1e3 * t['cython']:>13.2f}"
              f"{t['numpy'] / t['cython']:>8.1f}x  {same(out['numpy'], out['cython'])}")


if __name__ == "__main__":
    main()
