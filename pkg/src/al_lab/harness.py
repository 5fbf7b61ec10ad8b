"""Experiment configuration, execution and CSV persistence.

Config files are flat ``key = value`` text; ``#`` starts a comment and
unknown keys are rejected.  Keys and defaults::

    name = experiment            run id written to every record
    d = 1
    regression = constant:0.2    | threshold:0.5 | piecewise:a:b:c0:c1;...
    p = harmonic                 schedule rules, see ScheduleSpec
    k = loglog
    h = default
    m = square
    H = default
    estimator = knn              comma list of knn, histogram, kernel, nullified
    estimator_k =                fixed k (default: schedule k_n)
    estimator_h =                fixed h (default: schedule h_n)
    r_null =                     nullification radius (default: h_n / 100)
    tie_rule = threshold
    nullify = mutual
    mode = pool
    base = adversarial
    splitting = false
    route = r
    n_max = 3200
    checkpoints = 200,800,3200
    replicates = 30
    seed = 0
    pool_max = 20000000          cap on the pool size m
    mc_draws = 100000            Monte Carlo risk draws (d > 1 only)
    out = results
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import itertools
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .core import (ConstantEta, DistributionSpec, PiecewiseContinuous, ScheduleSpec, ThresholdStep,
                   bayes_risk, build_pool)
from .errors import ConfigError, LabError
from .estimators import KINDS, scheduled_spec
from .geometry import exact_risk, mc_risk, predicted_one_measure, structure_from_arrays
from .rng import RngContract
from .samplers import SamplerConfig, run_sampler

CSV_COLUMNS = ("run_id", "replicate", "n", "estimator", "sampler", "exact_risk", "p_one", "o_n",
               "interior_cov", "d_n", "s_n", "bayes_risk", "seed")

DEFAULTS = {
    "name": "experiment", "d": "1", "regression": "constant:0.2",
    "p": "harmonic", "k": "loglog", "h": "default", "m": "square", "H": "default",
    "estimator": "knn", "estimator_k": "", "estimator_h": "", "r_null": "",
    "tie_rule": "threshold", "nullify": "mutual",
    "mode": "pool", "base": "adversarial", "splitting": "false", "route": "r",
    "n_max": "3200", "checkpoints": "200,800,3200", "replicates": "30", "seed": "0",
    "pool_max": "20000000", "mc_draws": "100000", "out": "results",
}


def parse_regression(text: str):
    name, _, arg = text.partition(":")
    try:
        if name == "constant":
            return ConstantEta(float(arg))
        if name == "threshold":
            return ThresholdStep(float(arg))
        if name == "piecewise":
            segs = [tuple(float(v) for v in part.split(":")) for part in arg.split(";") if part]
            if any(len(s) != 4 for s in segs):
                raise ConfigError("piecewise segments are a:b:c0:c1")
            return PiecewiseContinuous(tuple(segs))
    except ValueError as exc:
        raise ConfigError(f"bad regression {text!r}: {exc}") from None
    raise ConfigError(f"unknown regression {text!r}")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _float_or_none(key, text):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dist: DistributionSpec
    sched: ScheduleSpec
    sampler: SamplerConfig
    estimators: tuple
    n_max: int
    checkpoints: tuple
    replicates: int
    master_seed: int
    out: str = "results"
    name: str = "experiment"
    estimator_k: int | None = None
    estimator_h: float | None = None
    r_null: float | None = None
    tie_rule: str = "threshold"
    nullify: str = "mutual"
    pool_max: int = 20_000_000
    mc_draws: int = 100_000
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        cps = tuple(self.checkpoints)
        if not cps or list(cps) != sorted(set(cps)) or cps[0] < 1 or cps[-1] > self.n_max:
            raise ConfigError("checkpoints must be sorted, distinct and within [1, n_max]")
        for kind in self.estimators:
            if kind not in KINDS:
                raise ConfigError(f"unknown estimator {kind!r}")
        if self.pool_max < self.n_max:
            raise ConfigError("pool_max must be at least n_max")
        # build one spec per kind up front so bad parameters fail at load time
        for kind in self.estimators:
            self.spec_at(kind, self.checkpoints[0])

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        unknown = set(mapping) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        v = {**DEFAULTS, **{k: str(val).strip() for k, val in mapping.items()}}
        d = _int("d", v["d"])
        dist = DistributionSpec(d, parse_regression(v["regression"]))
        sched = ScheduleSpec(d=d, p=v["p"], k=v["k"], h=v["h"], m=v["m"], H=v["H"])
        sampler = SamplerConfig(dist, sched, mode=v["mode"], base=v["base"],
                                splitting=_bool(v["splitting"]), route=v["route"])
        try:
            cps = tuple(int(c) for c in v["checkpoints"].split(",") if c.strip())
        except ValueError:
            raise ConfigError(f"bad checkpoints {v['checkpoints']!r}") from None
        ek = v["estimator_k"]
        return cls(
            dist=dist, sched=sched, sampler=sampler,
            estimators=tuple(e.strip() for e in v["estimator"].split(",") if e.strip()),
            n_max=_int("n_max", v["n_max"]), checkpoints=cps,
            replicates=_int("replicates", v["replicates"]),
            master_seed=_int("seed", v["seed"]), out=v["out"], name=v["name"],
            estimator_k=_int("estimator_k", ek) if ek else None,
            estimator_h=_float_or_none("estimator_h", v["estimator_h"]),
            r_null=_float_or_none("r_null", v["r_null"]),
            tie_rule=v["tie_rule"], nullify=v["nullify"],
            pool_max=_int("pool_max", v["pool_max"]), mc_draws=_int("mc_draws", v["mc_draws"]),
            raw=dict(v),
        )

    def with_overrides(self, **kv) -> "ExperimentConfig":
        return ExperimentConfig.from_mapping({**self.raw, **{k: str(x) for k, x in kv.items()}})

    def spec_at(self, kind: str, n: int):
        return scheduled_spec(kind, self.sched, n, k=self.estimator_k, h=self.estimator_h,
                              r_null=self.r_null, tie_rule=self.tie_rule, nullify=self.nullify)

    def estimator_label(self, kind: str) -> str:
        if kind == "knn":
            return f"knn(k={self.estimator_k})" if self.estimator_k else f"knn(k={self.sched.k})"
        if self.estimator_h:
            return f"{kind}(h={self.estimator_h:g})"
        return f"{kind}(h={self.sched.h})"

    @property
    def pool_size(self) -> int:
        return min(self.sched.m_at(self.n_max), self.pool_max)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def load_config(path, seed: int | None = None, **overrides) -> ExperimentConfig:
    """Read a config file; ``seed`` (and any overrides) replace file values."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    mapping = parse_config_text(text)
    mapping.setdefault("name", Path(path).stem)
    if seed is not None:
        mapping["seed"] = str(seed)
    mapping.update({k: str(v) for k, v in overrides.items()})
    return ExperimentConfig.from_mapping(mapping)


# --------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class RiskRecord:
    run_id: str
    replicate: int
    n: int
    estimator: str
    sampler: str
    exact_risk: float
    p_one: float
    o_n: float
    interior_cov: float
    d_n: float
    s_n: float
    bayes_risk: float
    seed: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def failed(self) -> bool:
        return self.estimator.startswith("ERROR")


def _checkpoint_records(cfg: ExperimentConfig, replicate: int, state, k: int, streams, t0):
    n = state.i
    rows = []
    if state.pool is not None and cfg.dist.d == 1:
        sm = structure_from_arrays(state.view, state.queried, state.pool.x, k)
        o_n, icov, d_n = float(sm.o_n), sm.interior_coverage, sm.d_n
    else:
        o_n = icov = d_n = math.nan
    br = bayes_risk(cfg.dist)
    for kind in cfg.estimators:
        spec = cfg.spec_at(kind, n)
        if cfg.dist.d == 1 and spec.tie_rule == "threshold":
            risk = exact_risk(spec, state.s, cfg.dist)
            p_one = predicted_one_measure(spec, state.s)
        else:
            risk, _ = mc_risk(spec, state.s, cfg.dist, cfg.mc_draws, streams["eval"], streams["tie"])
            p_one = math.nan
        rows.append(RiskRecord(cfg.name, replicate, n, cfg.estimator_label(kind), cfg.sampler.label(),
                               float(risk), float(p_one), o_n, float(icov), float(d_n),
                               float(cfg.sched.s(n)), float(br), cfg.master_seed,
                               time.perf_counter() - t0))
    return rows


def run_replicate(cfg: ExperimentConfig, replicate: int) -> list:
    """All checkpoint records of one replicate, or a single error record."""
    t0 = time.perf_counter()
    contract = RngContract(cfg.master_seed)
    streams = contract.streams(replicate)
    try:
        pool = None
        if cfg.sampler.mode == "pool":
            pool = build_pool(cfg.n_max, cfg.dist, cfg.sched, contract.stream(replicate, "pool"),
                              m=cfg.pool_size)
        recs = []
        run_sampler(cfg.sampler, cfg.n_max, cfg.checkpoints, streams, pool=pool,
                    probe=lambda st, k: recs.extend(_checkpoint_records(cfg, replicate, st, k, streams, t0)))
        return recs
    except LabError as exc:
        nan = math.nan
        return [RiskRecord(cfg.name, replicate, 0, f"ERROR:{type(exc).__name__}: {exc}",
                           cfg.sampler.label(), nan, nan, nan, nan, nan, nan, nan, cfg.master_seed,
                           time.perf_counter() - t0)]


def _job(args):
    cfg, rep = args
    return run_replicate(cfg, rep)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list:
    """Records sorted by (replicate, checkpoint, estimator order)."""
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    if threads <= 1 or cfg.replicates == 1:
        results = [_job(j) for j in jobs]
    else:
        with cf.ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_job, jobs))
    order = {cfg.estimator_label(k): i for i, k in enumerate(cfg.estimators)}
    records = [r for chunk in results for r in chunk]
    records.sort(key=lambda r: (r.replicate, r.n, order.get(r.estimator, -1)))
    return records


def sweep_configs(cfg: ExperimentConfig, vary: dict) -> list:
    """Cross product of overrides; each config gets a suffixed run id."""
    keys = sorted(vary)
    out = []
    for combo in itertools.product(*(vary[k] for k in keys)):
        kv = dict(zip(keys, combo))
        suffix = ",".join(f"{k}={v}" for k, v in kv.items())
        out.append(cfg.with_overrides(name=f"{cfg.name}[{suffix}]", **kv))
    return out


# --------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))
    return path


def read_csv(path) -> list:
    """Rows as RiskRecord objects (wall time is not persisted)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header")
        for row in reader:
            out.append(RiskRecord(
                row["run_id"], int(row["replicate"]), int(row["n"]), row["estimator"], row["sampler"],
                *(float(row[c]) for c in CSV_COLUMNS[5:12]), int(row["seed"])))
    return out


def summarize(records) -> list:
    """(run_id, estimator, sampler, n, mean, min, max, count) per group, sorted."""
    groups: dict = {}
    for r in records:
        if r.failed:
            continue
        groups.setdefault((r.run_id, r.estimator, r.sampler, r.n), []).append(r.exact_risk)
    out = []
    for key in sorted(groups):
        vals = sorted(groups[key])  # order-independent mean
        out.append((*key, math.fsum(vals) / len(vals), vals[0], vals[-1], len(vals)))
    return out


def output_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override or cfg.out)
