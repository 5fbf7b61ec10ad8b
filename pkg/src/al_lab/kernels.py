"""Pick the compiled kernels when available, else the numpy fallback.

Set ``AL_LAB_PURE=1`` to force the fallback (used by the benchmark and the
equivalence tests).
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

BACKEND = "numpy"
_impl = _fallback
if os.environ.get("AL_LAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

CODES = {"knn": _fallback.KNN, "histogram": _fallback.HIST, "kernel": _fallback.KERNEL,
         "nullified": _fallback.NULLIFIED}


def knn_scores_1d(xs, signs, k, queries):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    signs = np.ascontiguousarray(signs, dtype=np.float64)
    return _impl.knn_scores_1d(xs, signs, int(k), queries)


def scan_open_points(view, kprime):
    return _impl.scan_open_points(np.ascontiguousarray(view, dtype=np.int8), int(kprime))


def gn_min(fixed, lattice, n_adv, code, k, h, r_null, mutual, x, r):
    """(min value, placement) over multisets of ``n_adv`` lattice points."""
    lattice = np.asarray(lattice, dtype=np.float64)
    if lattice.ndim == 1:
        lattice = lattice[:, None]
    d = lattice.shape[1]
    fixed = np.asarray(fixed, dtype=np.float64).reshape(-1, d)
    k = int(k or 0)
    h = float(h or 1.0)
    r_null = float(r_null or 0.0)
    if d == 1 and _impl is not _fallback:
        return _impl.gn_min_1d(fixed[:, 0], lattice[:, 0], int(n_adv), int(code), k, h, r_null,
                               bool(mutual), float(np.ravel(x)[0]), float(r))
    return _fallback.gn_min(fixed, lattice, int(n_adv), code, k, h, r_null, bool(mutual), x, r)
