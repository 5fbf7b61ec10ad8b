"""Samplers: the augmented wrapper, its data-splitting variant and the base algorithms.

The augmented wrapper flips Z_i ~ Bernoulli(p_i) at each step; on Z_i = 1 it
queries a uniformly random unqueried point, otherwise it defers to the base
algorithm.  Base algorithms:

* ``adversarial``: A-dagger.  Query the smallest open point; if none, the
  unqueried point furthest from every queried point.
* ``passive``: another uniform draw.
* ``greedy``: the unqueried point nearest a 1-NN decision boundary.

Base algorithms only ever see ``state.view``.  Without splitting it is the
pool's revealed-label array; with splitting it shows R-labels and marks
S-routed points as ``PLACEHOLDER`` (queried, label hidden).
"""
from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (ACTIVE, PLACEHOLDER, RANDOM, UNQUERIED, DistributionSpec, LabeledSet, Pool,
                   ScheduleSpec)
from .errors import ConfigError, ExhaustionError

MODES = ("pool", "query-synthesis")
BASES = ("adversarial", "passive", "greedy")
ROUTES = ("r", "s")


@dataclass(frozen=True)
class SamplerConfig:
    dist: DistributionSpec
    sched: ScheduleSpec
    mode: str = "pool"
    base: str = "adversarial"
    splitting: bool = False
    route: str = "r"  # where the base algorithm's picks go under splitting

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown sampler mode {self.mode!r}")
        if self.base not in BASES:
            raise ConfigError(f"unknown base algorithm {self.base!r}")
        if self.route not in ROUTES:
            raise ConfigError(f"unknown route {self.route!r}")
        if self.mode == "query-synthesis" and self.base == "adversarial":
            raise ConfigError("the adversarial learner is pool-defined; use mode=pool")
        if self.splitting and self.mode != "pool":
            raise ConfigError("data splitting requires pool mode")
        if self.base in ("adversarial", "greedy") and self.dist.d != 1:
            raise ConfigError(f"base algorithm {self.base!r} is one-dimensional only")
        if self.dist.d != self.sched.d:
            raise ConfigError("distribution and schedule dimensions differ")

    def label(self) -> str:
        parts = [self.base, "split" if self.splitting else "augmented"]
        if self.mode == "query-synthesis":
            parts.append("synth")
        return "+".join(parts)


def detect_open_points(view, k: int) -> np.ndarray:
    """Sorted open indices of a revealed-label view for estimator parameter k."""
    if isinstance(view, Pool):
        view = view.revealed
    return kernels.scan_open_points(view, k // 2 + 1)


def _side_open(view, nb, step, kprime) -> bool:
    m = len(view)
    if nb < 0 or nb >= m or view[nb] == UNQUERIED:
        return False
    for t in range(kprime):
        p = nb + step * t
        if p < 0 or p >= m or view[p] != 1:
            return True
    return False


def _is_open(view, i, kprime) -> bool:
    return view[i] == UNQUERIED and (_side_open(view, i + 1, 1, kprime)
                                     or _side_open(view, i - 1, -1, kprime))


@dataclass
class Snapshot:
    """What ``run_sampler`` keeps at a checkpoint."""

    n: int
    k: int
    s: LabeledSet
    r: LabeledSet | None
    o_n: int
    queried: np.ndarray  # sorted pool indices (empty in query synthesis)
    view: np.ndarray | None = field(default=None, repr=False)
    z_sum: int = 0


class SamplerState:
    """Mutable trajectory state; single owner, advanced in place."""

    def __init__(self, cfg: SamplerConfig, pool: Pool | None = None):
        if cfg.mode == "pool" and pool is None:
            raise ConfigError("pool mode needs a pool")
        self.cfg = cfg
        self.pool = pool if cfg.mode == "pool" else None
        d = cfg.dist.d
        self.s = LabeledSet(d)
        self.r = LabeledSet(d) if cfg.splitting else None
        self.i = 0
        self.z_history: list[int] = []
        self.open_index: set[int] = set()
        self.kprime = None
        self.queried: list[int] = []
        if self.pool is not None:
            self.view = self.pool.revealed if not cfg.splitting else np.full(
                self.pool.m, UNQUERIED, dtype=np.int8)
            self._unqueried = self.pool.m
            self._gaps: set = set()
            self._heap: list = []
        else:
            self.view = None
            self._unqueried = None

    # -- bookkeeping ---------------------------------------------------------

    @property
    def unqueried(self) -> int:
        return self._unqueried

    @property
    def o(self) -> int:
        return len(self.open_index)

    def refresh_open(self, k: int):
        """Recompute the open set from scratch if k' changed."""
        kp = k // 2 + 1
        if kp == self.kprime:
            return
        self.kprime = kp
        cand = set()
        for q in self.queried:
            cand.add(q - 1)
            cand.add(q + 1)
        m = self.pool.m
        self.open_index = {i for i in cand if 0 <= i < m and _is_open(self.view, i, kp)}

    def _update_open(self, q: int):
        if self.kprime is None:
            return
        kp = self.kprime
        lo, hi = max(0, q - kp), min(self.pool.m - 1, q + kp)
        for i in range(lo, hi + 1):
            if _is_open(self.view, i, kp):
                self.open_index.add(i)
            else:
                self.open_index.discard(i)

    def _gap_value(self, a, b):
        """Best (value, index) for an unqueried point strictly between queried a and b."""
        x = self.pool.x
        m = self.pool.m
        if a < 0:
            return x[b] - x[0], 0
        if b >= m:
            return x[m - 1] - x[a], m - 1
        mid = 0.5 * (x[a] + x[b])
        j = int(np.searchsorted(x, mid, side="left"))  # a < j <= b
        best = None
        for c in (j - 1, j):
            if a < c < b:
                v = min(x[c] - x[a], x[b] - x[c])
                if best is None or v > best[0]:
                    best = (v, c)
        return best

    def _push_gap(self, a, b):
        # a = -1 / b = m stand for the pool edges
        if b - a < 2 or (a < 0 and b >= self.pool.m):
            return
        v, idx = self._gap_value(a, b)
        self._gaps.add((a, b))
        heapq.heappush(self._heap, (-v, idx, a, b))

    def _mark_queried(self, q: int, view_value: int):
        self.view[q] = view_value
        self._unqueried -= 1
        pos = bisect.bisect_left(self.queried, q)
        a = self.queried[pos - 1] if pos > 0 else -1
        b = self.queried[pos] if pos < len(self.queried) else self.pool.m
        self.queried.insert(pos, q)
        self._gaps.discard((a, b))
        self._push_gap(a, q)
        self._push_gap(q, b)
        self._update_open(q)

    # -- point choice ---------------------------------------------------------

    def uniform_unqueried(self, rng: np.random.Generator) -> int:
        if self._unqueried <= 0:
            raise ExhaustionError(f"pool of {self.pool.m} points exhausted at step {self.i + 1}")
        m = self.pool.m
        if self._unqueried * 2 >= m:
            while True:
                j = int(rng.integers(m))
                if self.pool.revealed[j] == UNQUERIED:
                    return j
        free = np.flatnonzero(self.pool.revealed == UNQUERIED)
        return int(free[rng.integers(len(free))])

    def furthest_point(self) -> int:
        """Unqueried index furthest from the queried set (ties: smallest index)."""
        if self._unqueried <= 0:
            raise ExhaustionError("no unqueried pool point left")
        if not self.queried:
            return largest_gap_start(self.pool.x)
        while self._heap:
            negv, idx, a, b = self._heap[0]
            if (a, b) in self._gaps:
                return idx
            heapq.heappop(self._heap)
        raise ExhaustionError("no unqueried pool point left")

    def snapshot(self, k: int, keep_view: bool = False) -> Snapshot:
        queried = np.asarray(self.queried, dtype=np.int64)
        o_n = len(detect_open_points(self.view, k)) if self.view is not None else 0
        return Snapshot(n=self.i, k=k, s=self.s.copy(),
                        r=self.r.copy() if self.r is not None else None,
                        o_n=o_n, queried=queried,
                        view=self.view.copy() if keep_view and self.view is not None else None,
                        z_sum=int(sum(self.z_history)))


def largest_gap_start(x) -> int:
    """Start-up pick with nothing queried: left end of the widest pool gap."""
    x = np.asarray(x)
    if len(x) < 2:
        return 0
    gaps = np.diff(x)
    # equal gaps up to rounding count as ties; ties go left
    return int(np.flatnonzero(gaps >= gaps.max() * (1 - 1e-9))[0])


def adversarial_next(state: SamplerState, k: int) -> int:
    """A-dagger: smallest open point, else the furthest unqueried point."""
    state.refresh_open(k)
    if state.open_index:
        return min(state.open_index)
    return state.furthest_point()


def greedy_next(state: SamplerState) -> int:
    """Unqueried point nearest a midpoint between differently labelled neighbours."""
    x = state.pool.x
    view = state.view
    lab = [q for q in state.queried if view[q] in (0, 1)]
    best = None
    for a, b in zip(lab, lab[1:]):
        if view[a] == view[b] or b - a < 2:
            continue
        mid = 0.5 * (x[a] + x[b])
        j = int(np.searchsorted(x, mid))
        lo, hi = j - 1, j
        while lo > a or hi < b:  # walk outward past placeholders
            cands = [c for c in (lo, hi) if a < c < b and view[c] == UNQUERIED]
            if cands:
                c = min(cands, key=lambda c: (abs(x[c] - mid), c))
                key = (abs(x[c] - mid), c)
                if best is None or key < best:
                    best = key
                break
            lo, hi = lo - 1, hi + 1
    if best is None:
        return state.furthest_point()
    return best[1]


def _base_pick(state: SamplerState, cfg: SamplerConfig, k: int, rng) -> int:
    if cfg.base == "adversarial":
        return adversarial_next(state, k)
    if cfg.base == "greedy":
        return greedy_next(state)
    return state.uniform_unqueried(rng)


def _synth_point(state, cfg, rng, active: bool):
    """Query synthesis: a fresh point and its Bernoulli(f(x)) label."""
    d = cfg.dist.d
    if active and cfg.base == "greedy" and len(state.s) >= 2:
        order = np.argsort(state.s.x, kind="stable")
        xs, ys = state.s.x[order], state.s.labels[order]
        flips = np.flatnonzero(ys[1:] != ys[:-1])
        if len(flips):
            widths = xs[flips + 1] - xs[flips]
            j = flips[int(np.argmax(widths))]
            pt = np.array([0.5 * (xs[j] + xs[j + 1])])
            y = int(rng.random() < cfg.dist.f(pt.reshape(1, d))[0])
            return pt, y
    pt = rng.random(d)
    y = int(rng.random() < cfg.dist.f(pt.reshape(1, d))[0])
    return pt, y


def augmented_step(state: SamplerState, cfg: SamplerConfig, rng: dict) -> SamplerState:
    """One step of the augmented algorithm (no splitting).  Mutates and returns ``state``."""
    i = state.i + 1
    z = int(rng["z"].random() < cfg.sched.p_at(i))
    k = cfg.sched.k_at(i)
    if cfg.mode == "query-synthesis":
        stream = rng["synth"] if z else rng["base"]
        pt, y = _synth_point(state, cfg, stream, active=not z)
        state.s.append(pt, y, RANDOM if z else ACTIVE, i)
    else:
        if z:
            idx = state.uniform_unqueried(rng["pick"])
        else:
            if state.unqueried <= 0:
                raise ExhaustionError(f"pool exhausted at step {i}")
            idx = _base_pick(state, cfg, k, rng["base"])
        y = state.pool.reveal(idx)
        state._mark_queried(idx, y)
        state.s.append(state.pool.coords[idx], y, RANDOM if z else ACTIVE, i, pool_index=idx)
        if cfg.base == "adversarial":
            state.refresh_open(k)
    state.i = i
    state.z_history.append(z)
    return state


def data_splitting_step(state: SamplerState, cfg: SamplerConfig, rng: dict) -> SamplerState:
    """One data-splitting step; the base algorithm sees only the R view."""
    if not cfg.splitting or cfg.mode != "pool":
        raise ConfigError("data_splitting_step needs splitting=True in pool mode")
    i = state.i + 1
    z = int(rng["z"].random() < cfg.sched.p_at(i))
    k = cfg.sched.k_at(i)
    pool = state.pool
    if z:
        idx = state.uniform_unqueried(rng["pick"])
    else:
        if state.unqueried <= 0:
            raise ExhaustionError(f"pool exhausted at step {i}")
        idx = _base_pick(state, cfg, k, rng["base"])
    y = pool.reveal(idx)
    pt = pool.coords[idx]
    src = RANDOM if z else ACTIVE
    if not z and cfg.route == "r":
        state.r.append(pt, y, src, i, pool_index=idx)
        state._mark_queried(idx, y)
    else:
        state.s.append(pt, y, src, i, pool_index=idx)
        state.r.append(pt, -1, src, i, pool_index=idx)
        state._mark_queried(idx, PLACEHOLDER)
    if cfg.base == "adversarial":
        state.refresh_open(k)
    state.i = i
    state.z_history.append(z)
    return state


def run_sampler(cfg: SamplerConfig, n: int, checkpoints, rng: dict, pool: Pool | None = None,
                probe=None) -> list:
    """Advance ``n`` steps and record a snapshot at each checkpoint.

    ``probe(state, k)`` replaces the default ``state.snapshot(k)`` if given.
    """
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints and (checkpoints[0] < 1 or checkpoints[-1] > n):
        raise ConfigError("checkpoints must lie in [1, n]")
    state = SamplerState(cfg, pool)
    step = data_splitting_step if cfg.splitting else augmented_step
    probe = probe or (lambda st, k: st.snapshot(k))
    out = []
    want = iter(checkpoints)
    nxt = next(want, None)
    for _ in range(n):
        step(state, cfg, rng)
        if state.i == nxt:
            out.append(probe(state, cfg.sched.k_at(state.i)))
            nxt = next(want, None)
    return out
