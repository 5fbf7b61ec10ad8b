"""Exact one-dimensional geometry of the estimators, plus trajectory metrics.

Every 1D estimator predicts a piecewise-constant label on [0, 1].  We build
that step function exactly (Voronoi-style cells for k-NN, grid cells for
histograms, root-split linear pieces for the kernel rule) and integrate the
regression function against it.  Points on a cell boundary belong to the
left cell, which matches the k-NN tie rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import ConstantEta, DistributionSpec, LabeledSet
from .errors import DegenerateInputError, InsufficientDataError
from .estimators import EstimatorSpec, cell_ids, n_cells, nullified_mask, predict_many


@dataclass(frozen=True)
class CoveragePartition:
    edges: np.ndarray  # strictly increasing, edges[0] = 0, edges[-1] = 1
    owners: list  # per cell: entry index, window (start, stop) or cell id
    labels: np.ndarray  # predicted label per cell

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def coverages(self) -> np.ndarray:
        return self.lengths

    def predicted_one_measure(self) -> float:
        return float(np.sum(self.lengths[self.labels == 1]))


def _sorted_1d(s: LabeledSet):
    if s.d != 1:
        raise ValueError("exact geometry is one-dimensional")
    order = np.lexsort((s.steps, s.x))
    xs = s.x[order]
    if len(xs) > 1 and np.any(np.diff(xs) == 0):
        raise DegenerateInputError("duplicate coordinates")
    return order, xs


def coverage_1nn(s: LabeledSet) -> CoveragePartition:
    """Nearest-neighbour cells: boundaries at midpoints of consecutive points."""
    if len(s) == 0:
        raise InsufficientDataError("coverage needs a nonempty set")
    order, xs = _sorted_1d(s)
    edges = np.concatenate([[0.0], 0.5 * (xs[:-1] + xs[1:]), [1.0]])
    labels = s.labels[order].astype(np.uint8)
    return CoveragePartition(edges, [int(i) for i in order], labels)


def k_cover_partition(s: LabeledSet, k: int, kprime: int | None = None) -> CoveragePartition:
    """Cells of the size-k windows of consecutive points.

    The switch from window j to j + 1 happens at the midpoint of the j-th and
    (j + k)-th order statistics.  A window predicts 1 with at least k' ones.
    """
    if len(s) < k:
        raise InsufficientDataError(f"k={k} needs at least k points, got {len(s)}")
    order, xs = _sorted_1d(s)
    n = len(xs)
    kprime = k // 2 + 1 if kprime is None else kprime
    edges = np.concatenate([[0.0], 0.5 * (xs[: n - k] + xs[k:]), [1.0]])
    ones = np.concatenate([[0], np.cumsum(s.labels[order])])
    votes = ones[k:] - ones[: n - k + 1]
    labels = (votes >= kprime).astype(np.uint8)
    owners = [(j, j + k) for j in range(n - k + 1)]
    return CoveragePartition(edges, owners, labels)


def _cell_edges(h: float):
    nc = n_cells(h)
    return np.minimum(np.arange(nc + 1) * h, 1.0)


def _histogram_partition(spec: EstimatorSpec, s: LabeledSet) -> CoveragePartition:
    edges = _cell_edges(spec.h)
    nc = len(edges) - 1
    score = np.zeros(nc)
    if len(s):
        if s.d != 1:
            raise ValueError("exact geometry is one-dimensional")
        alive = np.ones(len(s), dtype=bool)
        if spec.kind == "nullified":
            alive = ~nullified_mask(s.coords, spec.r_null, s.steps, spec.nullify)
        ids = cell_ids(s.coords, spec.h)
        np.add.at(score, ids[alive], 2.0 * s.labels[alive] - 1.0)
    return CoveragePartition(edges, list(range(nc)), (score > 0).astype(np.uint8))


def _kernel_partition(spec: EstimatorSpec, s: LabeledSet) -> CoveragePartition:
    """Exact sign pattern of the piecewise-linear kernel score."""
    if len(s) == 0:
        return CoveragePartition(np.array([0.0, 1.0]), [None], np.zeros(1, np.uint8))
    order, xs = _sorted_1d(s)
    h = spec.h
    sg = 2.0 * s.labels[order] - 1.0
    brk = np.concatenate([[0.0, 1.0], xs, xs - h, xs + h])
    brk = np.unique(brk[(brk >= 0.0) & (brk <= 1.0)])
    a, b = brk[:-1], brk[1:]
    mid = 0.5 * (a + b)
    # left members satisfy mid - h < X < mid; right members mid < X < mid + h
    ps = np.concatenate([[0.0], np.cumsum(sg)])
    psx = np.concatenate([[0.0], np.cumsum(sg * xs)])
    lo = np.searchsorted(xs, mid - h, side="right")
    piv = np.searchsorted(xs, mid, side="right")
    hi = np.searchsorted(xs, mid + h, side="left")
    c2h = 1.0 / (2.0 * h)
    sl, sxl = ps[piv] - ps[lo], psx[piv] - psx[lo]
    sr, sxr = ps[hi] - ps[piv], psx[hi] - psx[piv]
    alpha = sl + sxl * c2h + sr - sxr * c2h
    beta = (sr - sl) * c2h
    edges, labels = [0.0], []
    for ai, bi, al, be in zip(a, b, alpha, beta):
        if be == 0.0:
            pieces = [(bi, al > 0)]
        else:
            root = -al / be
            if ai < root < bi:
                pieces = [(root, al + be * 0.5 * (ai + root) > 0), (bi, al + be * 0.5 * (root + bi) > 0)]
            else:
                pieces = [(bi, al + be * 0.5 * (ai + bi) > 0)]
        for end, pos in pieces:
            lab = 1 if pos else 0
            if labels and labels[-1] == lab:
                edges[-1] = end
            else:
                edges.append(end)
                labels.append(lab)
    return CoveragePartition(np.array(edges), [None] * len(labels), np.array(labels, np.uint8))


def prediction_partition(spec: EstimatorSpec, s: LabeledSet) -> CoveragePartition:
    """Piecewise-constant predicted label on [0, 1] (threshold tie rule)."""
    if spec.kind == "knn":
        return k_cover_partition(s, spec.k)
    if spec.kind == "kernel":
        return _kernel_partition(spec, s)
    return _histogram_partition(spec, s)


def prediction_intervals(spec: EstimatorSpec, s: LabeledSet) -> list:
    """Maximal intervals (a, b) where the rule predicts 1."""
    part = prediction_partition(spec, s)
    out = []
    for a, b, lab in zip(part.edges[:-1], part.edges[1:], part.labels):
        if lab != 1 or b <= a:
            continue
        if out and out[-1][1] == a:
            out[-1] = (out[-1][0], float(b))
        else:
            out.append((float(a), float(b)))
    return out


def predicted_one_measure(spec: EstimatorSpec, s: LabeledSet) -> float:
    """Exact P_X-measure of {x : prediction is 1}."""
    if spec.tie_rule != "threshold":
        raise ValueError("exact measure needs the threshold tie rule")
    return prediction_partition(spec, s).predicted_one_measure()


def exact_risk(spec: EstimatorSpec, s: LabeledSet, dist: DistributionSpec) -> float:
    """P(prediction != Y) for X uniform on [0, 1]."""
    if dist.d != 1:
        raise ValueError("exact risk is one-dimensional; use mc_risk")
    reg = dist.regression
    if isinstance(reg, ConstantEta):
        return reg.eta + (1.0 - 2.0 * reg.eta) * predicted_one_measure(spec, s)
    part = prediction_partition(spec, s)
    risk = 0.0
    for a, b, lab in zip(part.edges[:-1], part.edges[1:], part.labels):
        if b <= a:
            continue
        f_mass = reg.integral(float(a), float(b))
        risk += (b - a) - f_mass if lab == 1 else f_mass
    return float(risk)


def mc_risk(spec: EstimatorSpec, s: LabeledSet, dist: DistributionSpec, draws: int,
            rng: np.random.Generator, tie_stream=None):
    """Monte Carlo risk from fresh (X, Y) draws; returns (estimate, standard error)."""
    xs, ys = dist.sample(draws, rng)
    pred = predict_many(spec, xs, s, tie_stream)
    err = float(np.mean(pred != ys))
    return err, float(np.sqrt(max(err * (1 - err), 1e-300) / draws))


# --------------------------------------------------------------------------
# trajectory structure


@dataclass(frozen=True)
class StructureMetrics:
    o_n: int
    intervals: list  # (start, end) pool indices, inclusive
    interior_count: int
    interior_coverage: float
    d_n: float


def structure_from_arrays(view, queried, x, k: int) -> StructureMetrics:
    """Metrics from a revealed view, the sorted queried indices and pool coordinates."""
    queried = np.asarray(queried, dtype=np.int64)
    o_n = len(kernels.scan_open_points(view, k // 2 + 1))
    if len(queried) == 0:
        return StructureMetrics(o_n, [], 0, 0.0, 0.0)
    breaks = np.flatnonzero(np.diff(queried) != 1)
    starts = queried[np.concatenate([[0], breaks + 1])]
    ends = queried[np.concatenate([breaks, [len(queried) - 1]])]
    long = ends - starts >= 2
    count = int(np.sum(ends[long] - starts[long] - 1))
    # interior coverage telescopes within a run: (x[e] + x[e-1] - x[s] - x[s+1]) / 2
    s_, e_ = starts[long], ends[long]
    cov = float(np.sum(x[e_] + x[e_ - 1] - x[s_] - x[s_ + 1]) / 2.0)
    d_n = float(np.max(x[starts[1:]] - x[ends[:-1]])) if len(starts) > 1 else 0.0
    intervals = [(int(a), int(b)) for a, b in zip(starts, ends)]
    return StructureMetrics(o_n, intervals, count, cov, d_n)


def structure_metrics(state, k: int) -> StructureMetrics:
    """Metrics for a pool-mode SamplerState (or snapshot with a view)."""
    pool = getattr(state, "pool", None)
    if pool is None or state.view is None:
        raise ValueError("structure metrics need a pool-mode state")
    return structure_from_arrays(state.view, state.queried, pool.x, k)


def cell_occupancy(s: LabeledSet, h: float, source: str | None = "random", M: int | None = None):
    """Entries per histogram cell; with ``M`` also the measure of cells holding <= M.

    ``source`` is ``"random"``, ``"active"`` or None for all entries.
    """
    nc = n_cells(h)
    d = s.d
    counts = np.zeros(nc ** d, dtype=np.int64)
    if len(s):
        mask = np.ones(len(s), dtype=bool)
        if source == "random":
            mask = s.z == 1
        elif source == "active":
            mask = s.z == 0
        np.add.at(counts, cell_ids(s.coords[mask], h), 1)
    if M is None:
        return counts
    side = np.diff(_cell_edges(h))
    vol = side
    for _ in range(d - 1):
        vol = np.multiply.outer(vol, side).ravel()
    return counts, float(np.sum(vol[counts <= M]))
