"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled module exactly; the test suite
runs both and compares.
"""
from __future__ import annotations

import itertools

import numpy as np

KNN, HIST, KERNEL, NULLIFIED = 0, 1, 2, 3


def group_starts(xs):
    """Index of the first entry of each run of equal coordinates."""
    n = len(xs)
    new = np.ones(n, dtype=bool)
    new[1:] = xs[1:] != xs[:-1]
    return np.maximum.accumulate(np.where(new, np.arange(n), 0)).astype(np.int64)


def knn_scores_1d(xs, signs, k, queries):
    """Signed k-NN score at each query.

    ``xs`` sorted by (coordinate, step) with matching ``signs`` in {-1, +1}.
    Distance ties take the smaller coordinate, then the earlier step; on the
    left side that means a run of equal coordinates is consumed from its start.
    """
    xs = np.asarray(xs, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    n = len(xs)
    gs = group_starts(xs)
    right = np.searchsorted(xs, q, side="left")
    left = right - 1  # last index of the current left run
    nxt = np.where(left >= 0, gs[np.clip(left, 0, n - 1)], 0)  # next entry to take in that run
    score = np.zeros(len(q))
    for _ in range(k):
        dl = np.where(left >= 0, q - xs[np.clip(left, 0, n - 1)], np.inf)
        dr = np.where(right < n, xs[np.clip(right, 0, n - 1)] - q, np.inf)
        take_left = dl <= dr
        idx = np.where(take_left, nxt, right)
        score += signs[np.clip(idx, 0, n - 1)]
        nxt = np.where(take_left, nxt + 1, nxt)
        done = take_left & (nxt > left)
        left = np.where(done, gs[np.clip(left, 0, n - 1)] - 1, left)
        nxt = np.where(done & (left >= 0), gs[np.clip(left, 0, n - 1)], nxt)
        right = np.where(take_left, right, right + 1)
    return score


def _all_ones_from(ones, kprime, direction):
    """r[j] = True iff positions j, j+dir, ..., j+(k'-1)dir exist and are all 1."""
    m = len(ones)
    c = np.concatenate([[0], np.cumsum(ones, dtype=np.int64)])
    out = np.zeros(m, dtype=bool)
    if kprime > m:
        return out
    if direction > 0:
        j = np.arange(m - kprime + 1)
        out[: m - kprime + 1] = (c[j + kprime] - c[j]) == kprime
    else:
        j = np.arange(kprime - 1, m)
        out[kprime - 1 :] = (c[j + 1] - c[j + 1 - kprime]) == kprime
    return out


def scan_open_points(view, kprime):
    """Indices of open points in a revealed-label view.

    ``view`` holds -1 (unqueried), 0/1 (label) or 2 (queried, label hidden).
    """
    view = np.asarray(view, dtype=np.int8)
    m = len(view)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    unq = view == -1
    queried = ~unq
    ones = view == 1
    run_right = _all_ones_from(ones, kprime, +1)
    run_left = _all_ones_from(ones, kprime, -1)
    is_open = np.zeros(m, dtype=bool)
    is_open[:-1] |= queried[1:] & ~run_right[1:]
    is_open[1:] |= queried[:-1] & ~run_left[:-1]
    return np.flatnonzero(is_open & unq).astype(np.int64)


# --------------------------------------------------------------------------
# g_n lattice search


def _cells(p, h, ncell):
    return np.minimum(np.floor(p / h).astype(np.int64), ncell - 1)


def gn_values(pts, code, k, h, r_null, mutual, x, r):
    """In-ball normalised weight mass for a batch of point configurations.

    ``pts`` has shape (P, N, d); entry order along N doubles as step order.
    """
    pts = np.asarray(pts, dtype=np.float64)
    P, N, d = pts.shape
    x = np.asarray(x, dtype=np.float64).reshape(d)
    dist = np.sqrt(((pts - x) ** 2).sum(axis=2))
    inball = dist <= r
    if code == KNN:
        keys = [np.broadcast_to(np.arange(N), (P, N))]
        keys += [pts[:, :, j] for j in range(d - 1, -1, -1)]
        keys.append(dist)
        order = np.lexsort(keys, axis=-1)[:, :k]
        hit = np.take_along_axis(inball, order, axis=1)
        return hit.sum(axis=1) / k
    if code == KERNEL:
        w = np.where(dist <= h, 1.0 - dist / (2.0 * h), 0.0)
    else:
        ncell = max(1, int(np.ceil(1.0 / h - 1e-12)))
        same = np.all(_cells(pts, h, ncell) == _cells(x, h, ncell), axis=2)
        w = same.astype(np.float64)
        if code == NULLIFIED:
            diff = np.sqrt(((pts[:, :, None, :] - pts[:, None, :, :]) ** 2).sum(axis=3))
            close = diff <= r_null
            if mutual:
                close &= ~np.eye(N, dtype=bool)
            else:
                close &= np.tril(np.ones((N, N), dtype=bool), -1)
            w[close.any(axis=2)] = 0.0
    tot = w.sum(axis=1)
    num = (w * inball).sum(axis=1)
    return np.where(tot > 0, num / np.where(tot > 0, tot, 1.0), 0.0)


def gn_min(fixed, lattice, n_adv, code, k, h, r_null, mutual, x, r, chunk=20000):
    """Minimum of ``gn_values`` over all multisets of ``n_adv`` lattice points.

    Returns (value, placement) with placement a tuple of lattice indices.
    """
    fixed = np.asarray(fixed, dtype=np.float64).reshape(-1, np.shape(lattice)[1])
    lattice = np.asarray(lattice, dtype=np.float64)
    best, arg = np.inf, ()
    combos = itertools.combinations_with_replacement(range(len(lattice)), n_adv)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.int64).reshape(len(block), n_adv)
        adv = lattice[idx]  # (P, a, d)
        base = np.broadcast_to(fixed, (len(block),) + fixed.shape)
        vals = gn_values(np.concatenate([base, adv], axis=1), code, k, h, r_null, mutual, x, r)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, arg = float(vals[j]), tuple(int(t) for t in idx[j])
        if best == 0.0:
            break
    return best, arg
