"""Numerical checks of the sufficiency conditions and the probability bounds.

Nothing here proves anything; each function evaluates a finite-n
consequence exactly (lattice search, closed-form enumeration) or by Monte
Carlo with a reported standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from . import kernels
from .core import ConstantEta, DistributionSpec, Pool, ScheduleSpec, build_pool
from .errors import (BudgetError, ConditioningError, ConfigError, CouplingViolation,
                     InsufficientDataError, PreconditionError)
from .estimators import EstimatorSpec, n_cells, raw_weight_matrix
from .samplers import SamplerConfig, SamplerState, augmented_step

ZETA_3_2 = float(special.zeta(1.5))
BUDGET = 10**9
JITTER = 1e-9


# --------------------------------------------------------------------------
# g_n lattice oracle


@dataclass(frozen=True)
class GnInstance:
    spec: EstimatorSpec
    x: tuple
    r: float
    fixed_points: tuple  # ((coords...), e_flag) pairs
    n_adversarial: int = 0
    grid_resolution: int = 64

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(np.atleast_1d(np.asarray(self.x, dtype=float))))
        pts = tuple((tuple(np.atleast_1d(np.asarray(p, dtype=float))), int(e))
                    for p, e in self.fixed_points)
        object.__setattr__(self, "fixed_points", pts)
        if self.r <= 0:
            raise ConfigError("radius must be positive")
        if not 0 <= self.n_adversarial <= 4:
            raise ConfigError("n_adversarial must lie in [0, 4]")
        if not 2 <= self.grid_resolution <= 256:
            raise ConfigError("grid_resolution must lie in [2, 256]")
        x = np.array(self.x)
        for p, e in pts:
            if len(p) != len(x):
                raise ConfigError("fixed point dimension differs from x")
            if e and np.sqrt(np.sum((np.array(p) - x) ** 2)) > self.r:
                raise ConfigError(f"E-point {p} lies outside the ball")

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def e_points(self) -> np.ndarray:
        pts = [p for p, e in self.fixed_points if e]
        return np.array(pts, dtype=float).reshape(-1, self.d)

    @property
    def adversary_count(self) -> int:
        """Placed points plus the E = 0 points, which the adversary also controls."""
        return self.n_adversarial + sum(1 for _, e in self.fixed_points if not e)


def gn_lattice(inst: GnInstance) -> np.ndarray:
    """Search lattice: a regular grid plus +-1e-9 neighbourhoods of every breakpoint."""
    spec = inst.spec
    axes = []
    for j in range(inst.d):
        xj = inst.x[j]
        marks = [xj, xj - inst.r, xj + inst.r]
        marks += [p[j] for p, _ in inst.fixed_points]
        if spec.kind in ("histogram", "nullified"):
            marks += list(np.arange(n_cells(spec.h) + 1) * spec.h)
        if spec.kind == "kernel":
            marks += [xj - spec.h, xj + spec.h]
        if spec.kind == "nullified":
            for p, _ in inst.fixed_points:
                marks += [p[j] - spec.r_null, p[j] + spec.r_null]
        marks = np.array(marks)
        extra = np.concatenate([marks - JITTER, marks, marks + JITTER])
        axis = np.concatenate([np.linspace(0.0, 1.0, inst.grid_resolution), extra])
        axes.append(np.unique(np.clip(axis, 0.0, 1.0)))
    if inst.d == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def gn_search(inst: GnInstance):
    """(infimum, adversarial placement coordinates) by exhaustive lattice search."""
    spec = inst.spec
    a = inst.adversary_count
    fixed = inst.e_points
    if spec.kind == "knn" and len(fixed) + a < spec.k:
        raise InsufficientDataError("fewer points than k")
    lattice = gn_lattice(inst)
    if float(len(lattice)) ** a > BUDGET:
        raise BudgetError(f"{len(lattice)}^{a} placements exceed the search budget")
    val, arg = kernels.gn_min(fixed, lattice, a, kernels.CODES[spec.kind], spec.k, spec.h,
                              spec.r_null, spec.nullify == "mutual", np.array(inst.x), inst.r)
    return float(val), lattice[list(arg)] if arg else np.zeros((0, inst.d))


def gn_oracle(inst: GnInstance) -> float:
    """Lattice infimum of the normalised weight mass inside B(x, r)."""
    return gn_search(inst)[0]


def gn_direct(spec: EstimatorSpec, x, r, points) -> float:
    """In-ball weight mass for a fixed configuration (no search)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        return 0.0
    if points.shape[1] != np.size(x):
        points = points.reshape(-1, np.size(x))
    w = raw_weight_matrix(spec, np.atleast_1d(x), points)[0]
    tot = w.sum()
    if tot == 0:
        return 0.0
    inball = np.sqrt(((points - np.atleast_1d(x)) ** 2).sum(axis=1)) <= r
    return float(w[inball].sum() / tot)


@dataclass
class Estimate:
    mean: float
    se: float
    accepted: int
    tried: int
    values: np.ndarray = field(repr=False, default=None)


def estimate_condition1(spec: EstimatorSpec, dist: DistributionSpec, sched: ScheduleSpec, n: int,
                        r: float, mc: int, rng: np.random.Generator, adv_cap: int = 2,
                        grid: int = 32, min_tries: int = 1000) -> Estimate:
    """Monte Carlo E[g_n | #E-points >= H_n].

    Only ``adv_cap`` of the non-E points are searched over; the rest are
    dropped.  Fewer adversaries can only raise the infimum, so the estimate
    is an upper bound on the true conditional expectation.
    """
    H = sched.H_at(n)
    p = sched.p_array(n)
    d = dist.d
    vals, tried = [], 0
    while len(vals) < mc:
        tried += 1
        x = rng.random(d)
        z = rng.random(n) < p
        pts = rng.random((int(z.sum()), d))
        inball = np.sqrt(((pts - x) ** 2).sum(axis=1)) <= r
        if inball.sum() >= H:
            e = pts[inball]
            adv = min(adv_cap, n - len(e))
            inst = GnInstance(spec, tuple(x), r, tuple((tuple(q), 1) for q in e), adv, grid)
            vals.append(gn_oracle(inst))
        if tried >= min_tries and len(vals) < 1e-3 * tried:
            raise ConditioningError(f"acceptance {len(vals)}/{tried} below 1e-3 (H_n = {H})")
    v = np.array(vals)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return Estimate(float(v.mean()), se, len(v), tried, v)


# --------------------------------------------------------------------------
# bounded-support diagnostics


@dataclass
class BoundedSupRow:
    n: int
    h: float
    max_weight: float
    diameter: float
    q10: float
    q50: float
    q90: float


@dataclass
class BoundedSupReport:
    kind: str
    K: float
    rows: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bounded_sup(kind: str, sched: ScheduleSpec, n_list, mc: int,
                      rng: np.random.Generator, K: float = 1.0) -> BoundedSupReport:
    """Weight bound, support diameter and random weight mass sum_i w(X, X_i) Z_i."""
    if kind not in ("histogram", "kernel"):
        raise ConfigError("bounded-support diagnostics cover histogram and kernel rules")
    d = sched.d
    rows = []
    for n in sorted(n_list):
        h = sched.h_at(n)
        spec = EstimatorSpec(kind, h=h)
        p = sched.p_array(n)
        mass = np.empty(mc)
        wmax = 0.0
        for t in range(mc):
            x = rng.random(d)
            pts = rng.random((int((rng.random(n) < p).sum()), d))
            if len(pts) == 0:
                mass[t] = 0.0
                continue
            w = raw_weight_matrix(spec, x, pts)[0]
            mass[t] = w.sum()
            wmax = max(wmax, float(w.max()))
        diam = 2.0 * h if kind == "kernel" else h * math.sqrt(d)
        q10, q50, q90 = np.quantile(mass, [0.1, 0.5, 0.9])
        rows.append(BoundedSupRow(n, h, wmax, diam, float(q10), float(q50), float(q90)))
    violations = []
    for row in rows:
        if row.max_weight > K:
            violations.append(f"n={row.n}: weight {row.max_weight:.4g} exceeds K={K}")
    for a, b in zip(rows, rows[1:]):
        if not b.diameter < a.diameter:
            violations.append(f"support diameter not decreasing from n={a.n} to n={b.n}")
        if not b.q10 > a.q10:
            violations.append(f"10th percentile of random mass not increasing from n={a.n} to n={b.n}")
    return BoundedSupReport(kind, K, rows, violations)


# --------------------------------------------------------------------------
# hitting-time races


@dataclass(frozen=True)
class RaceSpec:
    i0: int
    eta: float
    kprime: int = 1
    p: str = "harmonic"
    mc_draws: int = 100_000

    def __post_init__(self):
        if self.i0 < 1 or self.kprime < 1:
            raise ConfigError("need i0 >= 1 and k' >= 1")
        if not 0 < self.eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        if self.mc_draws < 10_000:
            raise ConfigError("race estimates need at least 10^4 draws")


@dataclass
class RaceResult:
    spec: RaceSpec
    p_less: float
    se_less: float
    p_equal: float
    se_equal: float
    bound_less: float
    bound_equal: float

    @property
    def ok(self) -> bool:
        return (self.p_less <= self.bound_less + 3 * self.se_less
                and self.p_equal <= self.bound_equal + 3 * self.se_equal)


def run_survival(eta: float, kprime: int, horizon: int) -> np.ndarray:
    """q[t] = P(no run of k' ones among Y_1..Y_t), t = 0..horizon.

    Uses q(t) = q(t-1) - (1-eta) eta^k' q(t-k'-1), the renewal identity for
    a run completing exactly at t.
    """
    c = (1.0 - eta) * eta**kprime
    impulse = np.zeros(horizon + 1)
    impulse[0] = 1.0
    if kprime <= horizon:
        impulse[kprime] = -(eta**kprime)
    den = np.zeros(kprime + 2)
    den[0], den[1], den[-1] = 1.0, -1.0, c
    return signal.lfilter([1.0], den, impulse)


def race_bounds(rs: RaceSpec):
    sched = ScheduleSpec(p=rs.p)
    if rs.kprime == 1:
        p_next = sched.p_at(rs.i0 + 1)
        return p_next / rs.eta, p_next
    less = ZETA_3_2 / (2.0 * math.sqrt(rs.i0)) / (1.0 - rs.eta) * (rs.eta ** -rs.kprime - 1.0)
    return less, 1.0 / rs.i0


def race_mc(rs: RaceSpec, rng: np.random.Generator) -> RaceResult:
    """Monte Carlo P(T1 < T2) and P(T1 = T2) with the closed-form bounds.

    T1 (first random query after i0) is drawn exactly by inverting its
    survival function; given T1 = t, the outcome is drawn from the exact law
    of T2 (first completed run of k' ones) at t.
    """
    c = (1.0 - rs.eta) * rs.eta**rs.kprime
    horizon = int(min(5e7, math.ceil(800.0 / c) + rs.kprime + 2))
    q = run_survival(rs.eta, rs.kprime, horizon)
    q = np.maximum(q, 0.0)
    n = rs.mc_draws
    v = rng.random(n)
    if rs.p == "harmonic":
        with np.errstate(divide="ignore"):
            t1 = np.ceil(rs.i0 * v / (1.0 - v))
        t1 = np.maximum(t1, 1.0)
    else:
        p = ScheduleSpec(p=rs.p).p_array(rs.i0 + horizon)[rs.i0:]
        cdf = 1.0 - np.exp(np.cumsum(np.log1p(-np.minimum(p, 1.0 - 1e-300))))
        t1 = np.searchsorted(cdf, v, side="left").astype(float) + 1.0
    inside = t1 <= horizon
    ti = np.where(inside, t1, 1).astype(np.int64)
    p_eq = np.where(inside, q[ti - 1] - q[ti], 0.0)
    p_gt = np.where(inside, q[ti], 0.0)
    u = rng.random(n)
    equal = u < p_eq
    less = (u >= p_eq) & (u < p_eq + p_gt)
    pl, pe = float(less.mean()), float(equal.mean())
    bl, be = race_bounds(rs)
    return RaceResult(rs, pl, math.sqrt(pl * (1 - pl) / n), pe, math.sqrt(pe * (1 - pe) / n), bl, be)


@dataclass
class RecursionTable:
    p11: float
    coupling: float
    table: np.ndarray  # table[a-1, b-1]
    closed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.table <= self.closed * (1 + 1e-12)))


def race_recursion(p11: float, coupling: float | None = None, a: int = 8, b: int = 8) -> RecursionTable:
    """Upper bounds p^(a,b) from the recursion, against 3^(a+b) p11^a.

    p^(1,b) = p11 + (1 - p11) p^(1,b-1) (at most b p11), p^(a,1) = p11^a, and
    p^(a,b) = p11 p^(a-1,b) + c p^(a-1,b-1) + p^(a,b-1) otherwise.  The
    closed form dominates whenever c <= 3 p11.
    """
    if not (1 <= a <= 8 and 1 <= b <= 8):
        raise ConfigError("a and b must lie in [1, 8]")
    c = p11 if coupling is None else coupling
    t = np.zeros((a, b))
    for i in range(a):
        for j in range(b):
            if i == 0:
                t[i, j] = p11 if j == 0 else p11 + (1 - p11) * t[0, j - 1]
            elif j == 0:
                t[i, j] = p11 * t[i - 1, 0]
            else:
                t[i, j] = p11 * t[i - 1, j] + c * t[i - 1, j - 1] + t[i, j - 1]
    ai = np.arange(1, a + 1)[:, None]
    bj = np.arange(1, b + 1)[None, :]
    closed = 3.0 ** (ai + bj) * p11**ai
    return RecursionTable(p11, c, t, closed)


# --------------------------------------------------------------------------
# open-point driving process


def uprime_increment(z, y, kprime, i, z_hist, y_hist) -> int:
    """Idealised increment U'_i from the (Z, Y) history (1-indexed step i)."""
    if z == 1 and y == 0:
        return 2
    if kprime == 1:
        return -1 if (z == 0 and y == 1) else 0
    if i - kprime - 1 < 1:
        return 0
    js = range(i - kprime, i + 1)
    if all(z_hist[j] == 0 and y_hist[j] == 1 for j in js) and y_hist[i - kprime - 1] == 0:
        return -1
    return 0


def expected_uprime(p: float, eta: float, kprime: int = 1) -> float:
    if kprime == 1:
        return 2 * p * (1 - eta) - (1 - p) * eta
    return 2 * p * (1 - eta) - ((1 - p) * eta) ** (kprime + 1) * (1 - eta)


@dataclass
class UPrimeResult:
    kprime: int
    horizon: int
    replicates: int
    violations: list  # (replicate, step, O_prev, U, U') tuples
    final_o: np.ndarray
    cycle_lengths: np.ndarray
    ideal_cycle_lengths: np.ndarray
    checked_steps: int

    @property
    def p_many_open(self) -> float:
        cap = 4 if self.kprime == 1 else 6
        return float(np.mean(self.final_o > cap))


def _cycles(levels) -> np.ndarray:
    zeros = np.flatnonzero(np.asarray(levels) == 0)
    return np.diff(np.concatenate([[0], zeros + 1])) if len(zeros) else np.zeros(0, int)


def uprime_sim(sched: ScheduleSpec, eta: float, kprime: int, horizon: int, mc: int, seed: int = 0,
               pool_size: int | None = None, strict: bool = False) -> UPrimeResult:
    """Couple the adversarial sampler with its idealised driving process.

    Each replicate runs A-dagger (fixed k = 2k' - 1) on a ConstantEta pool,
    recomputes U'_i from the realised (Z_i, Y_i) and checks U_i <= U'_i on
    the steps where the domination is claimed: O_{i-1} != 0 for k' = 1, and
    O_l != 0 for l in {i-k'-2, ..., i-1} otherwise.
    """
    from .rng import RngContract

    if horizon > 10**6:
        raise ConfigError("horizon must be at most 10^6")
    k = 2 * kprime - 1
    run_sched = ScheduleSpec(d=1, p=sched.p, k=f"const:{k}", h=sched.h, m=sched.m, H=sched.H)
    dist = DistributionSpec(1, ConstantEta(eta))
    cfg = SamplerConfig(dist, run_sched, base="adversarial")
    m = pool_size or min(run_sched.m_at(horizon), 2_000_000)
    contract = RngContract(seed)
    violations, finals, cycles, ideal = [], [], [], []
    checked = 0
    for rep in range(mc):
        streams = contract.streams(rep)
        pool = build_pool(horizon, dist, run_sched, contract.stream(rep, "pool"), m=m)
        state = SamplerState(cfg, pool)
        state.refresh_open(k)
        o_hist = [0]
        z_hist, y_hist = [None], [None]
        walk, wlev = [], 0
        for i in range(1, horizon + 1):
            augmented_step(state, cfg, streams)
            z, y = state.z_history[-1], int(state.s.labels[-1])
            z_hist.append(z)
            y_hist.append(y)
            o = state.o
            u = o - o_hist[-1]
            up = uprime_increment(z, y, kprime, i, z_hist, y_hist)
            window = o_hist[max(0, i - 1 - (0 if kprime == 1 else kprime + 1)): i]
            if len(window) == (1 if kprime == 1 else kprime + 2) and all(window):
                checked += 1
                if u > up:
                    violations.append((rep, i, o_hist[-1], u, up))
                    if strict:
                        raise CouplingViolation(
                            f"U_{i} = {u} > U'_{i} = {up} (replicate {rep})",
                            trace={"replicate": rep, "step": i, "o": o_hist[-10:],
                                   "z": z_hist[-10:], "y": y_hist[-10:]})
            o_hist.append(o)
            wlev = max(0, wlev + up)
            walk.append(wlev)
        finals.append(o_hist[-1])
        cycles.append(_cycles(o_hist[1:]))
        ideal.append(_cycles(walk))
    return UPrimeResult(kprime, horizon, mc, violations, np.array(finals),
                        np.concatenate(cycles) if cycles else np.zeros(0),
                        np.concatenate(ideal) if ideal else np.zeros(0), checked)


# --------------------------------------------------------------------------
# majority vote bound


def _poisson_binomial(probs) -> np.ndarray:
    dist = np.array([1.0])
    for q in probs:
        dist = np.convolve(dist, [1.0 - q, q])
    return dist


def majority_error(probs, eta: float) -> float:
    """P(M_k != Z): M_k the majority of independent Bernoulli(probs) votes
    (fair coin on ties), Z ~ Bernoulli(eta) independent."""
    k = len(probs)
    pb = _poisson_binomial(probs)
    j = np.arange(k + 1)
    p_one = pb[2 * j > k].sum() + 0.5 * pb[2 * j == k].sum()
    return float(eta * (1.0 - p_one) + (1.0 - eta) * p_one)


def majority_bound(k: int, eps: float, eta: float) -> float:
    if k == 1:
        return 2 * min(eta, 1 - eta) + eps
    return min(eta, 1 - eta) + 2 / math.sqrt(k)


@dataclass
class MajorityResult:
    k: int
    eps: float
    eta: float
    worst: float
    worst_probs: tuple
    bound: float

    @property
    def ok(self) -> bool:
        return self.worst <= self.bound


def majority_bound_mc(k: int, eps: float, eta: float, search_grid: int = 0) -> MajorityResult:
    """Worst case of P(M_k != Z) over the corners of [eta - eps, eta + eps]^k.

    The error is affine in each coin's bias, so corners suffice; by symmetry
    only the number of high coins matters.  ``search_grid`` > 1 additionally
    scans homogeneous interior points as a sanity check.
    """
    if k < 1:
        raise ConfigError("k must be positive")
    if k > 1 and eps > abs(1 - 2 * eta) / 4:
        raise PreconditionError("the bound needs eps <= |1 - 2 eta| / 4 when k > 1")
    lo, hi = max(0.0, eta - eps), min(1.0, eta + eps)
    cands = [tuple([hi] * j + [lo] * (k - j)) for j in range(k + 1)]
    if search_grid > 1:
        cands += [tuple([g] * k) for g in np.linspace(lo, hi, search_grid)]
    vals = [majority_error(c, eta) for c in cands]
    j = int(np.argmax(vals))
    return MajorityResult(k, eps, eta, vals[j], cands[j], majority_bound(k, eps, eta))
