# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops.  ``_fallback.py`` mirrors every function here."""
import numpy as np

from al_lab import _fallback
cimport numpy as cnp
from libc.math cimport floor, fabs, ceil, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    KNN = 0
    HIST = 1
    KERNEL = 2
    NULLIFIED = 3


def knn_scores_1d(const double[::1] xs, const double[::1] signs, int k, queries):
    """Signed k-NN score at each query; ties take the smaller coordinate, then the earlier step."""
    q_arr = np.ascontiguousarray(queries, dtype=np.float64)
    cdef const double[::1] q = q_arr
    cdef cnp.int64_t[::1] start = np.searchsorted(np.asarray(xs), q_arr, side="left").astype(np.int64)
    cdef cnp.int64_t[::1] gs = _fallback.group_starts(np.asarray(xs))
    cdef Py_ssize_t n = xs.shape[0], g = q.shape[0], j, left, right, nxt
    cdef int t
    out = np.empty(g, dtype=np.float64)
    cdef double[::1] o = out
    cdef double qq, dl, dr, sc
    with nogil:
        for j in range(g):
            qq = q[j]
            right = start[j]
            left = right - 1
            nxt = gs[left] if left >= 0 else 0
            sc = 0.0
            for t in range(k):
                dl = qq - xs[left] if left >= 0 else INFINITY
                dr = xs[right] - qq if right < n else INFINITY
                if dl <= dr:
                    # equal coordinates on the left are taken earliest step first
                    sc += signs[nxt]
                    nxt += 1
                    if nxt > left:
                        left = gs[left] - 1
                        if left >= 0:
                            nxt = gs[left]
                else:
                    sc += signs[right]
                    right += 1
            o[j] = sc
    return out


cdef inline bint _side_open(const signed char[::1] view, Py_ssize_t nb, Py_ssize_t step,
                            int kprime, Py_ssize_t m) nogil:
    # neighbor nb must be queried; the side is open unless k' ones run outward from nb
    cdef int t
    cdef Py_ssize_t p
    if nb < 0 or nb >= m or view[nb] == -1:
        return False
    for t in range(kprime):
        p = nb + step * t
        if p < 0 or p >= m or view[p] != 1:
            return True
    return False


def scan_open_points(view_in, int kprime):
    """Indices of open points in a revealed-label view (-1, 0, 1, or 2)."""
    cdef const signed char[::1] view = np.ascontiguousarray(view_in, dtype=np.int8)
    cdef Py_ssize_t m = view.shape[0], i, cnt = 0
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(m):
            if view[i] != -1:
                continue
            if _side_open(view, i + 1, 1, kprime, m) or _side_open(view, i - 1, -1, kprime, m):
                o[cnt] = i
                cnt += 1
    return out[:cnt].copy()


cdef double _gn_eval(double* p, Py_ssize_t N, int code, int k, double h, double rnull,
                     bint mutual, double x, double r, Py_ssize_t ncell, Py_ssize_t cx,
                     char* used) nogil:
    cdef Py_ssize_t i, j, best, c
    cdef int t
    cdef double tot = 0.0, num = 0.0, w, dist, bd, di
    if code == KNN:
        for i in range(N):
            used[i] = 0
        for t in range(k):
            best = -1
            bd = 0.0
            for i in range(N):
                if used[i]:
                    continue
                di = fabs(p[i] - x)
                if best < 0 or di < bd or (di == bd and p[i] < p[best]):
                    best = i
                    bd = di
            used[best] = 1
            if bd <= r:
                num += 1.0
        return num / k
    for i in range(N):
        dist = fabs(p[i] - x)
        if code == KERNEL:
            w = 1.0 - dist / (2.0 * h) if dist <= h else 0.0
        else:
            c = <Py_ssize_t>floor(p[i] / h)
            if c > ncell - 1:
                c = ncell - 1
            w = 1.0 if c == cx else 0.0
            if w > 0.0 and code == NULLIFIED:
                for j in range(N):
                    if j == i or (not mutual and j > i):
                        continue
                    if fabs(p[i] - p[j]) <= rnull:
                        w = 0.0
                        break
        tot += w
        if dist <= r:
            num += w
    if tot > 0.0:
        return num / tot
    return 0.0


def gn_min_1d(fixed_in, lattice_in, int n_adv, int code, int k, double h, double rnull,
              bint mutual, double x, double r):
    """Lattice minimum of the in-ball weight mass in 1D; returns (value, placement)."""
    cdef const double[::1] fixed = np.ascontiguousarray(fixed_in, dtype=np.float64).ravel()
    cdef const double[::1] lat = np.ascontiguousarray(lattice_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n0 = fixed.shape[0], L = lat.shape[0], N = n0 + n_adv, i, j
    cdef Py_ssize_t ncell = 1, cx = 0
    if code != KNN and code != KERNEL:
        ncell = max(1, <Py_ssize_t>ceil(1.0 / h - 1e-12))
        cx = <Py_ssize_t>floor(x / h)
        if cx > ncell - 1:
            cx = ncell - 1
    cdef double* p = <double*>malloc(max(N, 1) * sizeof(double))
    cdef char* used = <char*>malloc(max(N, 1))
    cdef Py_ssize_t* c = <Py_ssize_t*>malloc(max(n_adv, 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* argc = <Py_ssize_t*>malloc(max(n_adv, 1) * sizeof(Py_ssize_t))
    cdef double best = INFINITY, v
    cdef bint done = False
    try:
        with nogil:
            for i in range(n0):
                p[i] = fixed[i]
            for j in range(n_adv):
                c[j] = 0
                argc[j] = 0
            while not done:
                for j in range(n_adv):
                    p[n0 + j] = lat[c[j]]
                v = _gn_eval(p, N, code, k, h, rnull, mutual, x, r, ncell, cx, used)
                if v < best:
                    best = v
                    for j in range(n_adv):
                        argc[j] = c[j]
                    if best == 0.0:
                        break
                # next nondecreasing index tuple
                j = n_adv - 1
                while j >= 0 and c[j] == L - 1:
                    j -= 1
                if j < 0:
                    done = True
                else:
                    c[j] += 1
                    for i in range(j + 1, n_adv):
                        c[i] = c[j]
        return best, tuple(argc[j] for j in range(n_adv))
    finally:
        free(p)
        free(used)
        free(c)
        free(argc)
