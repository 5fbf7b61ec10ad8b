"""Weighted-averaging classifiers: k-NN, histogram, kernel and nullified histogram.

All four share one decision rule: with labels mapped to {-1, +1}, predict 1
iff the raw signed score ``sum_i w(x, X_i) (2 y_i - 1)`` is positive.  For
k-NN this is exactly "at least k' = floor(k/2) + 1 ones among the k nearest".
An exact zero score is a tie: label 0 under the ``threshold`` rule, one fair
coin flip under ``fair-coin``.  An all-zero weight vector predicts 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import LabeledSet
from .errors import ConfigError, InsufficientDataError

KINDS = ("knn", "histogram", "kernel", "nullified")
TIE_RULES = ("threshold", "fair-coin")


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    k: int | None = None
    h: float | None = None
    r_null: float | None = None
    tie_rule: str = "threshold"
    nullify: str = "mutual"  # or "one-sided": only the later entry of a close pair

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown estimator {self.kind!r}")
        if self.tie_rule not in TIE_RULES:
            raise ConfigError(f"unknown tie rule {self.tie_rule!r}")
        if self.nullify not in ("mutual", "one-sided"):
            raise ConfigError(f"unknown nullification mode {self.nullify!r}")
        if self.kind == "knn":
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ConfigError("k-NN needs a positive integer k")
        else:
            if self.h is None or not 0 < self.h <= 1:
                raise ConfigError(f"{self.kind} needs h in (0, 1]")
        if self.kind == "nullified":
            if self.r_null is None or not 0 < self.r_null < self.h:
                raise ConfigError("nullified histogram needs 0 < r_null < h")

    @classmethod
    def knn(cls, k, **kw):
        return cls("knn", k=int(k), **kw)

    @classmethod
    def histogram(cls, h, **kw):
        return cls("histogram", h=float(h), **kw)

    @classmethod
    def kernel(cls, h, **kw):
        return cls("kernel", h=float(h), **kw)

    @classmethod
    def nullified(cls, h, r_null, **kw):
        return cls("nullified", h=float(h), r_null=float(r_null), **kw)

    @property
    def kprime(self) -> int:
        return self.k // 2 + 1

    def label(self) -> str:
        if self.kind == "knn":
            return f"knn(k={self.k})"
        if self.kind == "nullified":
            return f"nullified(h={self.h:.4g},r={self.r_null:.3g})"
        return f"{self.kind}(h={self.h:.4g})"

    def with_params(self, **kw) -> "EstimatorSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray
    normalized: bool
    raw: np.ndarray

    @property
    def total(self) -> float:
        return float(self.values.sum())


# --------------------------------------------------------------------------
# helpers


def n_cells(h: float) -> int:
    """Cells per axis; the last one is clipped to end at 1."""
    return max(1, math.ceil(1.0 / h - 1e-12))


def cell_ids(coords, h: float) -> np.ndarray:
    """Flat histogram cell index of each row of ``coords`` (shape (n, d))."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    nc = n_cells(h)
    ids = np.minimum(np.floor(coords / h).astype(np.int64), nc - 1)
    ids = np.maximum(ids, 0)
    flat = np.zeros(coords.shape[0], dtype=np.int64)
    for j in range(coords.shape[1]):
        flat = flat * nc + ids[:, j]
    return flat


def nullified_mask(coords, r_null: float, steps=None, mode: str = "mutual") -> np.ndarray:
    """True for entries zeroed by the nullification rule.

    ``mutual``: both members of any pair at distance <= r_null.
    ``one-sided``: only the entry with the later step index.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n = coords.shape[0]
    out = np.zeros(n, dtype=bool)
    if n < 2:
        return out
    if mode == "mutual" and coords.shape[1] == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        xs = coords[order, 0]
        close = np.diff(xs) <= r_null
        hit = np.zeros(n, dtype=bool)
        hit[:-1] |= close
        hit[1:] |= close
        out[order] = hit
        return out
    steps = np.arange(n) if steps is None else np.asarray(steps)
    for i in range(n):
        dist = np.sqrt(((coords - coords[i]) ** 2).sum(axis=1))
        near = dist <= r_null
        near[i] = False
        if mode == "mutual":
            out[i] = near.any()
        else:
            out[i] = np.any(near & (steps < steps[i]))
    return out


def _as_queries(x, d):
    q = np.asarray(x, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = q.reshape(-1, 1) if d == 1 else q.reshape(1, -1)
    if q.shape[1] != d:
        raise ValueError("query dimension mismatch")
    return q


def _entry_order(coords, steps):
    """Entry order used for tie-breaking: coordinates (lexicographic), then step."""
    keys = [steps] + [coords[:, j] for j in range(coords.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


# --------------------------------------------------------------------------
# raw weights


def raw_weight_matrix(spec: EstimatorSpec, queries, coords, steps=None) -> np.ndarray:
    """Raw weights w_n(x, X_i) for every query row and entry, shape (q, n)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n, d = coords.shape
    queries = _as_queries(queries, d)
    steps = np.arange(n) if steps is None else np.asarray(steps)
    if spec.kind == "knn":
        if n < spec.k:
            raise InsufficientDataError(f"k-NN with k={spec.k} needs at least k entries, got {n}")
        order = _entry_order(coords, steps)
        pts = coords[order]
        dist = np.sqrt(((queries[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        nearest = np.argsort(dist, axis=1, kind="stable")[:, : spec.k]
        w = np.zeros((queries.shape[0], n))
        rows = np.repeat(np.arange(queries.shape[0]), spec.k)
        w[rows, order[nearest.ravel()]] = 1.0
        return w
    if spec.kind == "kernel":
        dist = np.sqrt(((queries[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
        return np.where(dist <= spec.h, 1.0 - dist / (2.0 * spec.h), 0.0)
    same = cell_ids(queries, spec.h)[:, None] == cell_ids(coords, spec.h)[None, :]
    w = same.astype(float)
    if spec.kind == "nullified":
        w[:, nullified_mask(coords, spec.r_null, steps, spec.nullify)] = 0.0
    return w


def estimator_weights(spec: EstimatorSpec, x, s: LabeledSet, normalize: bool = True) -> WeightVector:
    """Weights W_ni(x) aligned with the entries of ``s``.

    Normalised weights are raw / sum(raw); an all-zero raw vector stays
    all-zero (empty cell or fully nullified).
    """
    if spec.kind == "knn" and len(s) == 0:
        raise InsufficientDataError("k-NN needs a nonempty labelled set")
    if len(s) == 0:
        empty = np.zeros(0)
        return WeightVector(empty, normalize, empty)
    raw = raw_weight_matrix(spec, x, s.coords, s.steps)[0]
    if not normalize:
        return WeightVector(raw.copy(), False, raw)
    total = raw.sum()
    values = raw / total if total > 0 else np.zeros_like(raw)
    return WeightVector(values, True, raw)


# --------------------------------------------------------------------------
# scores and predictions


def signed_score(spec: EstimatorSpec, x, s: LabeledSet) -> float:
    """sum_i w_n(x, X_i) (2 y_i - 1) with raw (unnormalised) weights."""
    return float(signed_scores(spec, x, s)[0])


def signed_scores(spec: EstimatorSpec, queries, s: LabeledSet, chunk: int = 4096) -> np.ndarray:
    """Vectorised signed score for many query points."""
    if spec.kind == "knn" and len(s) < spec.k:
        raise InsufficientDataError(f"k-NN with k={spec.k} needs at least k entries, got {len(s)}")
    d = s.d
    queries = _as_queries(queries, d)
    if len(s) == 0:
        return np.zeros(queries.shape[0])
    coords, labels, steps = s.coords, s.labels, s.steps
    if np.any(labels < 0):
        raise ValueError("cannot predict from placeholder labels")
    signs = 2.0 * labels - 1.0
    if spec.kind in ("histogram", "nullified"):
        ids = cell_ids(coords, spec.h)
        alive = np.ones(len(s), dtype=bool)
        if spec.kind == "nullified":
            alive = ~nullified_mask(coords, spec.r_null, steps, spec.nullify)
        uniq, inv = np.unique(ids[alive], return_inverse=True)
        per_cell = np.bincount(inv, weights=signs[alive], minlength=len(uniq))
        if len(uniq) == 0:
            return np.zeros(queries.shape[0])
        qids = cell_ids(queries, spec.h)
        pos = np.clip(np.searchsorted(uniq, qids), 0, len(uniq) - 1)
        return np.where(uniq[pos] == qids, per_cell[pos], 0.0)
    if spec.kind == "knn" and d == 1:
        return _knn_scores_1d(queries[:, 0], coords[:, 0], labels, steps, spec.k)
    out = np.empty(queries.shape[0])
    for lo in range(0, queries.shape[0], chunk):
        w = raw_weight_matrix(spec, queries[lo : lo + chunk], coords, steps)
        out[lo : lo + chunk] = w @ signs
    return out


def _knn_scores_1d(q, xs, labels, steps, k):
    order = np.lexsort((steps, xs))
    return kernels.knn_scores_1d(xs[order], 2.0 * labels[order] - 1.0, k, q)


def _resolve(scores, tie_rule, tie_stream):
    out = (scores > 0).astype(np.uint8)
    ties = np.flatnonzero(scores == 0)
    if tie_rule == "fair-coin" and len(ties):
        if tie_stream is None:
            raise ValueError("fair-coin tie rule needs a tie stream")
        for i in ties:
            out[i] = 1 if tie_stream.random() < 0.5 else 0
    return out


def predict_many(spec: EstimatorSpec, queries, s: LabeledSet, tie_stream=None) -> np.ndarray:
    """Predicted labels (uint8) for every query row."""
    return _resolve(signed_scores(spec, queries, s), spec.tie_rule, tie_stream)


def predict(spec: EstimatorSpec, x, s: LabeledSet, tie_stream=None) -> int:
    """Predicted label at a single point.

    With the fair-coin rule an exact tie consumes one draw from ``tie_stream``.
    """
    return int(predict_many(spec, x, s, tie_stream)[0])


def scheduled_spec(kind: str, sched, n: int, k: int | None = None, h: float | None = None,
                   r_null: float | None = None, **kw) -> EstimatorSpec:
    """Estimator for sample size n: fixed k/h if given, else the schedule's k_n/h_n.

    Without an explicit ``r_null`` the nullified histogram uses h_n / 100.
    """
    if kind == "knn":
        return EstimatorSpec("knn", k=int(k) if k else sched.k_at(n), **kw)
    h = float(h) if h else sched.h_at(n)
    if kind == "nullified":
        return EstimatorSpec("nullified", h=h, r_null=float(r_null) if r_null else h / 100.0, **kw)
    return EstimatorSpec(kind, h=h, **kw)
