"""Domain types: distributions, schedules, pools and labelled sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError

UNQUERIED = -1
PLACEHOLDER = 2  # queried, label withheld from the base algorithm (data splitting)

RANDOM = "random"
ACTIVE = "active"


# --------------------------------------------------------------------------
# regression functions f(x) = P(Y = 1 | X = x); all depend on the first
# coordinate only, so integrals over the unit cube reduce to 1D integrals.


@dataclass(frozen=True)
class ConstantEta:
    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta < 0.5:
            raise ConfigError(f"ConstantEta needs 0 < eta < 1/2, got {self.eta}")

    def f(self, x):
        return np.full(np.shape(x), self.eta, dtype=float)

    def integral(self, a: float, b: float) -> float:
        return self.eta * (b - a)

    def pieces(self):
        return [(0.0, 1.0, self.eta, 0.0)]


@dataclass(frozen=True)
class ThresholdStep:
    """Noise-free labels: f(x) = 1{x > threshold}."""

    threshold: float

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")

    def f(self, x):
        return (np.asarray(x) > self.threshold).astype(float)

    def integral(self, a: float, b: float) -> float:
        return max(0.0, b - max(a, self.threshold))

    def pieces(self):
        return [(0.0, self.threshold, 0.0, 0.0), (self.threshold, 1.0, 1.0, 0.0)]


@dataclass(frozen=True)
class PiecewiseContinuous:
    """Affine pieces ``(a, b, c0, c1)`` meaning f(x) = c0 + c1*x on [a, b)."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(tuple(float(v) for v in s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ConfigError("PiecewiseContinuous needs at least one segment")
        if segs[0][0] != 0.0 or segs[-1][1] != 1.0:
            raise ConfigError("segments must cover [0, 1]")
        for (a, b, c0, c1), nxt in zip(segs, segs[1:] + (None,)):
            if not a < b:
                raise ConfigError(f"empty segment [{a}, {b})")
            if nxt is not None and nxt[0] != b:
                raise ConfigError("segments must be contiguous")
            for v in (c0 + c1 * a, c0 + c1 * b):
                if v < -1e-12 or v > 1 + 1e-12:
                    raise ConfigError("eta(x) must stay in [0, 1]")
            if c1 == 0.0 and c0 == 0.5:
                raise ConfigError("eta identically 1/2 on a segment")

    def f(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        bounds = np.array([s[0] for s in self.segments[1:]])
        idx = np.searchsorted(bounds, x, side="right")
        c0 = np.array([s[2] for s in self.segments])
        c1 = np.array([s[3] for s in self.segments])
        out[...] = c0[idx] + c1[idx] * x
        return out

    def integral(self, a: float, b: float) -> float:
        total = 0.0
        for lo, hi, c0, c1 in self.segments:
            u, v = max(lo, a), min(hi, b)
            if u < v:
                total += c0 * (v - u) + 0.5 * c1 * (v * v - u * u)
        return total

    def pieces(self):
        return list(self.segments)


Regression = Union[ConstantEta, ThresholdStep, PiecewiseContinuous]


@dataclass(frozen=True)
class DistributionSpec:
    """Uniform marginal on [0,1]^d with a regression function of x[0]."""

    d: int
    regression: Regression

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")

    def f(self, coords):
        coords = np.asarray(coords, dtype=float)
        first = coords if coords.ndim <= 1 and self.d == 1 else coords[..., 0]
        return self.regression.f(first)

    def sample(self, size: int, rng: np.random.Generator):
        """Draw ``size`` labelled pairs (coords (size, d), labels uint8)."""
        coords = rng.random((size, self.d))
        labels = (rng.random(size) < self.f(coords)).astype(np.uint8)
        return coords, labels

    @property
    def eta_const(self):
        reg = self.regression
        return reg.eta if isinstance(reg, ConstantEta) else None


def bayes_risk(dist: DistributionSpec) -> float:
    """Integral of min(f, 1 - f) under the uniform marginal, in closed form."""
    total = 0.0
    for a, b, c0, c1 in dist.regression.pieces():
        cuts = [a, b]
        if c1 != 0.0:
            xs = (0.5 - c0) / c1
            if a < xs < b:
                cuts = [a, xs, b]
        for u, v in zip(cuts, cuts[1:]):
            mid = c0 + c1 * 0.5 * (u + v)
            integral = c0 * (v - u) + 0.5 * c1 * (v * v - u * u)
            total += integral if mid <= 0.5 else (v - u) - integral
    return total


# --------------------------------------------------------------------------
# schedules


def _parse_rule(rule: str):
    name, _, arg = rule.partition(":")
    return name.strip(), (float(arg) if arg else None)


@dataclass(frozen=True)
class ScheduleSpec:
    """Rules for p_i, k_n, h_n, m_n and H_n.

    Rules are short strings so configs stay human-readable:

    * ``p``: ``harmonic`` (1/i), ``one``, ``const:c``, ``power:a`` (i^-a)
    * ``k``: ``loglog`` (max(1, floor(ln ln max(n, 3)))), ``const:k``
    * ``h``: ``default`` (s_n^(-1/(2d))), ``const:h``, ``spow:a`` (s_n^-a)
    * ``m``: ``square`` (n^2), ``linear:c``, ``power:a``
    * ``H``: ``default`` (floor(sqrt(s_n / h_n^d))), ``k`` (H_n = k_n), ``const:H``
    """

    d: int = 1
    p: str = "harmonic"
    k: str = "loglog"
    h: str = "default"
    m: str = "square"
    H: str = "default"

    def __post_init__(self):
        for attr, allowed in (
            ("p", {"harmonic", "one", "const", "power"}),
            ("k", {"loglog", "const"}),
            ("h", {"default", "const", "spow"}),
            ("m", {"square", "linear", "power"}),
            ("H", {"default", "k", "const"}),
        ):
            name, arg = _parse_rule(getattr(self, attr))
            if name not in allowed:
                raise ConfigError(f"unknown {attr} rule {getattr(self, attr)!r}")
            if name in {"const", "power", "spow", "linear"} and arg is None:
                raise ConfigError(f"{attr} rule {name!r} needs an argument")
        name, arg = _parse_rule(self.p)
        if name == "const" and not 0 < arg <= 1:
            raise ConfigError("constant p must lie in (0, 1]")
        if name == "power" and not 0 <= arg <= 1:
            raise ConfigError("power p exponent must lie in [0, 1]")
        name, arg = _parse_rule(self.k)
        if name == "const" and (arg < 1 or arg != int(arg)):
            raise ConfigError("constant k must be a positive integer")
        name, arg = _parse_rule(self.h)
        if name == "const" and not 0 < arg <= 1:
            raise ConfigError("constant h must lie in (0, 1]")

    # -- p and s -----------------------------------------------------------

    def p_array(self, n: int) -> np.ndarray:
        """p_1..p_n as a float array (index 0 holds p_1)."""
        i = np.arange(1, n + 1, dtype=float)
        name, arg = _parse_rule(self.p)
        if name == "harmonic":
            return 1.0 / i
        if name == "one":
            return np.ones(n)
        if name == "const":
            return np.full(n, arg)
        return i ** (-arg)

    def p_at(self, i: int) -> float:
        name, arg = _parse_rule(self.p)
        if name == "harmonic":
            return 1.0 / i
        if name == "one":
            return 1.0
        if name == "const":
            return arg
        return float(i) ** (-arg)

    def s_array(self, n: int) -> np.ndarray:
        """s_1..s_n where s_n = p_1 + ... + p_n."""
        return _partial_sums(self.p, n)[:n]

    def s(self, n: int) -> float:
        if n <= 0:
            return 0.0
        return float(_partial_sums(self.p, n)[n - 1])

    # -- k, h, m, H --------------------------------------------------------

    def k_at(self, n: int) -> int:
        name, arg = _parse_rule(self.k)
        if name == "const":
            return int(arg)
        return max(1, int(math.floor(math.log(math.log(max(n, 3))))))

    def h_at(self, n: int) -> float:
        return float(self.h_from_s(np.array([self.s(n)]))[0])

    def h_from_s(self, s: np.ndarray) -> np.ndarray:
        name, arg = _parse_rule(self.h)
        if name == "const":
            return np.full(np.shape(s), arg)
        expo = 1.0 / (2 * self.d) if name == "default" else arg
        return np.minimum(1.0, np.asarray(s, dtype=float) ** (-expo))

    def k_array(self, n: int) -> np.ndarray:
        name, arg = _parse_rule(self.k)
        if name == "const":
            return np.full(n, int(arg))
        i = np.maximum(np.arange(1, n + 1), 3).astype(float)
        return np.maximum(1, np.floor(np.log(np.log(i)))).astype(int)

    def m_at(self, n: int) -> int:
        name, arg = _parse_rule(self.m)
        if name == "square":
            return n * n
        if name == "linear":
            return max(n, int(math.ceil(arg * n)))
        return max(n, int(math.ceil(n ** arg)))

    def H_at(self, n: int) -> int:
        name, arg = _parse_rule(self.H)
        if name == "const":
            return int(arg)
        if name == "k":
            return self.k_at(n)
        return int(math.floor(math.sqrt(self.s(n) / self.h_at(n) ** self.d)))

    def kprime_at(self, n: int) -> int:
        return self.k_at(n) // 2 + 1


_PARTIAL_SUMS: dict = {}


def _partial_sums(p_rule: str, n: int) -> np.ndarray:
    cached = _PARTIAL_SUMS.get(p_rule)
    if cached is None or len(cached) < n:
        size = max(n, 1024, 2 * (0 if cached is None else len(cached)))
        p = ScheduleSpec(p=p_rule).p_array(size)
        cached = np.cumsum(p)
        cached.setflags(write=False)
        _PARTIAL_SUMS[p_rule] = cached
    return cached


def schedule_diagnostics(sched: ScheduleSpec, n: int) -> dict:
    """Schedule values at ``n`` plus any monotonicity violation on 1..n."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    p = sched.p_array(n)
    s = sched.s_array(n)
    ks = sched.k_array(n)
    hs = sched.h_from_s(s)
    violations = []
    if np.any(p <= 0) or np.any(p > 1):
        violations.append("p_i outside (0, 1]")
    if np.any(np.diff(p) > 0):
        violations.append("p_i increasing somewhere")
    if np.any(np.diff(ks) < 0):
        violations.append("k_n decreasing somewhere")
    if np.any(np.diff(hs) > 1e-15):
        violations.append("h_n increasing somewhere")
    if sched.m_at(n) < n:
        violations.append("m_n < n")
    s_n, k_n, h_n, H_n = float(s[-1]), sched.k_at(n), sched.h_at(n), sched.H_at(n)
    return {
        "n": n,
        "s_n": s_n,
        "p_n": float(p[-1]),
        "k_n": k_n,
        "h_n": h_n,
        "k_over_s": k_n / s_n,
        "hd_s": h_n ** sched.d * s_n,
        "H_n": H_n,
        "H_over_s": H_n / s_n,
        "m_n": sched.m_at(n),
        "violations": violations,
    }


# --------------------------------------------------------------------------
# pool and labelled sets


@dataclass
class Pool:
    """Sorted unlabelled points with a hidden label table.

    ``revealed`` holds -1 for unqueried points and the label once queried;
    it is the only mutable part and belongs to a single sampler state.
    """

    coords: np.ndarray  # (m, d), lexicographically sorted
    labels: np.ndarray  # (m,) uint8, hidden
    revealed: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.coords.ndim != 2:
            raise ValueError("pool coords must be (m, d)")
        self.coords.setflags(write=False)
        self.labels.setflags(write=False)
        if self.revealed is None:
            self.revealed = np.full(len(self.labels), UNQUERIED, dtype=np.int8)

    @property
    def m(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def x(self) -> np.ndarray:
        """First coordinate (the full point when d == 1)."""
        return self.coords[:, 0]

    def reveal(self, idx: int) -> int:
        if self.revealed[idx] != UNQUERIED:
            raise ValueError(f"pool index {idx} already queried")
        y = int(self.labels[idx])
        self.revealed[idx] = y
        return y


def build_pool(n_target: int, dist: DistributionSpec, sched: ScheduleSpec, rng: np.random.Generator,
               m: int | None = None) -> Pool:
    """Draw m = sched.m(n_target) sorted points and their hidden labels.

    ``m`` overrides the schedule's pool size (it must still be >= n_target).
    """
    if n_target < 1:
        raise ConfigError("n_target must be >= 1")
    if dist.d != sched.d:
        raise ConfigError(f"dimension mismatch: distribution d={dist.d}, schedule d={sched.d}")
    m = sched.m_at(n_target) if m is None else int(m)
    if m < n_target:
        raise ConfigError(f"pool size {m} is smaller than n_target={n_target}")
    if dist.d == 1:
        # normalised partial sums of exponentials are uniform order statistics:
        # O(m) instead of a sort
        buf = rng.standard_exponential(m + 1)
        np.cumsum(buf, out=buf)
        buf /= buf[m]
        coords = buf[:m].reshape(m, 1)
    else:
        raw = rng.random((m, dist.d))
        order = np.lexsort(raw.T[::-1])
        coords = raw[order]
    labels = (rng.random(m) < dist.f(coords)).astype(np.uint8)
    return Pool(coords=coords, labels=labels)


class LabeledSet:
    """Queried examples in step order.

    Each entry holds (point, label, source, step, z, pool index).  Label
    ``PLACEHOLDER``-style entries (label -1) only appear in the decision set
    of the data-splitting sampler.
    """

    def __init__(self, d: int = 1):
        self.d = d
        self._coords: list = []
        self._labels: list = []
        self._sources: list = []
        self._steps: list = []
        self._z: list = []
        self._pool_idx: list = []
        self._cache: dict = {}

    @classmethod
    def from_arrays(cls, coords, labels, sources=None, steps=None, pool_idx=None):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        out = cls(d=coords.shape[1])
        n = coords.shape[0]
        labels = np.asarray(labels, dtype=int).reshape(-1)
        if len(labels) != n:
            raise ValueError("coords and labels length differ")
        sources = [RANDOM] * n if sources is None else list(sources)
        steps = range(1, n + 1) if steps is None else steps
        pool_idx = [-1] * n if pool_idx is None else pool_idx
        for c, y, src, st, pi in zip(coords, labels, sources, steps, pool_idx):
            out.append(c, int(y), src, int(st), pool_index=int(pi))
        return out

    def append(self, point, label: int, source: str, step: int, pool_index: int = -1):
        if source not in (RANDOM, ACTIVE):
            raise ValueError(f"unknown source {source!r}")
        if self._steps and step < self._steps[-1]:
            raise ValueError("entries must be appended in step order")
        pt = tuple(float(v) for v in np.atleast_1d(point))
        if len(pt) != self.d:
            raise ValueError("point dimension mismatch")
        self._coords.append(pt)
        self._labels.append(int(label))
        self._sources.append(source)
        self._steps.append(int(step))
        self._z.append(1 if source == RANDOM else 0)
        self._pool_idx.append(int(pool_index))
        self._cache.clear()

    def __len__(self):
        return len(self._labels)

    def _arr(self, key, data, dtype):
        if key not in self._cache:
            arr = np.array(data, dtype=dtype)
            if key == "coords":
                arr = arr.reshape(-1, self.d)
            arr.setflags(write=False)
            self._cache[key] = arr
        return self._cache[key]

    @property
    def coords(self) -> np.ndarray:
        return self._arr("coords", self._coords, float)

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    @property
    def labels(self) -> np.ndarray:
        return self._arr("labels", self._labels, np.int64)

    @property
    def steps(self) -> np.ndarray:
        return self._arr("steps", self._steps, np.int64)

    @property
    def z(self) -> np.ndarray:
        return self._arr("z", self._z, np.int64)

    @property
    def pool_indices(self) -> np.ndarray:
        return self._arr("pool", self._pool_idx, np.int64)

    @property
    def sources(self) -> list:
        return list(self._sources)

    def random_mask(self) -> np.ndarray:
        return self.z == 1

    def labelled(self) -> "LabeledSet":
        """Entries whose label is known (drops data-splitting placeholders)."""
        keep = self.labels >= 0
        return self.select(keep)

    def select(self, mask: Sequence[bool]) -> "LabeledSet":
        out = LabeledSet(self.d)
        for keep, c, y, src, st, pi in zip(
            mask, self._coords, self._labels, self._sources, self._steps, self._pool_idx
        ):
            if keep:
                out.append(c, y, src, st, pool_index=pi)
        return out

    def copy(self) -> "LabeledSet":
        return self.select([True] * len(self))

    def __repr__(self):
        return f"LabeledSet(n={len(self)}, d={self.d})"
