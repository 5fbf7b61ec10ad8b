"""Command line entry point: ``al-lab <command> ...``.

Exit codes: 0 success, 1 configuration error, 2 runtime error (including any
failed replicate), 3 a check or race failed under ``--assert``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, report, theory
from .core import ConstantEta, DistributionSpec, ScheduleSpec
from .errors import ConfigError, LabError
from .estimators import EstimatorSpec, scheduled_spec
from .rng import RngContract

log = logging.getLogger("al_lab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ASSERT = 0, 1, 2, 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str):
    return [int(t) for t in text.split(",") if t.strip()]


def _global_parent(suppress: bool) -> argparse.ArgumentParser:
    # the same flags are accepted before and after the subcommand; the
    # sub-parser copy uses SUPPRESS so it never clobbers an earlier value
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=_u64, default=default, help="master seed (env AL_LAB_SEED)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1)
    p.add_argument("--out", default=default, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="al-lab", parents=[_global_parent(False)],
                                  description="Augmented active learning simulations and checks.")
    sub = top.add_subparsers(dest="command", required=True)
    g = [_global_parent(True)]

    sim = sub.add_parser("simulate", parents=g, help="run a config and write CSV + SVG")
    sim.add_argument("config")

    sw = sub.add_parser("sweep", parents=g, help="run the cross product of overrides")
    sw.add_argument("config")
    sw.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2",
                    help="may be repeated")

    ck = sub.add_parser("check", parents=g, help="condition checkers")
    what = ck.add_mutually_exclusive_group(required=True)
    what.add_argument("--gn", action="store_true", help="g_n lattice oracle on one instance")
    what.add_argument("--cond1", action="store_true", help="Monte Carlo estimate of the E[g_n] condition")
    what.add_argument("--bounded-sup", action="store_true", help="bounded-support diagnostics")
    ck.add_argument("--estimator", default="histogram", choices=["knn", "histogram", "kernel", "nullified"])
    ck.add_argument("--k", type=int, default=1)
    ck.add_argument("--h", type=float, default=0.25)
    ck.add_argument("--r-null", type=float, default=0.01)
    ck.add_argument("--x", type=_floats, default=[0.3], help="query point, comma separated")
    ck.add_argument("--r", type=float, default=0.2, help="ball radius")
    ck.add_argument("--e-points", type=_floats, default=[], help="1D E-point coordinates")
    ck.add_argument("--free-points", type=_floats, default=[], help="1D non-E fixed coordinates")
    ck.add_argument("--adversaries", type=int, default=0)
    ck.add_argument("--grid", type=int, default=64)
    ck.add_argument("--n", type=_ints, default=[400], help="sample size(s)")
    ck.add_argument("--mc", type=int, default=200)
    ck.add_argument("--eta", type=float, default=0.2)
    ck.add_argument("--H", default="default", help="H_n rule for --cond1")
    ck.add_argument("--min", type=float, default=None, help="with --assert: required lower bound")
    ck.add_argument("--assert", dest="assert_", action="store_true")

    rc = sub.add_parser("race", parents=g, help="hitting-time races and driving-process checks")
    mode = rc.add_mutually_exclusive_group()
    mode.add_argument("--recursion", action="store_true")
    mode.add_argument("--uprime", action="store_true")
    mode.add_argument("--majority", action="store_true")
    rc.add_argument("--i0", type=_ints, default=[10, 100, 1000])
    rc.add_argument("--eta", type=_floats, default=[0.1, 0.2])
    rc.add_argument("--kprime", type=_ints, default=[1, 2, 3])
    rc.add_argument("--draws", type=int, default=100_000)
    rc.add_argument("--p11", type=_floats, default=[1e-4, 1e-3, 1e-2, 1e-1])
    rc.add_argument("--coupling", type=float, default=None)
    rc.add_argument("--horizon", type=int, default=10_000)
    rc.add_argument("--reps", type=int, default=20)
    rc.add_argument("--k", type=_ints, default=[1, 3, 9])
    rc.add_argument("--eps", type=float, default=None, help="default |1 - 2 eta| / 8")
    rc.add_argument("--assert", dest="assert_", action="store_true")

    rp = sub.add_parser("report", parents=g, help="render a results CSV")
    rp.add_argument("csv")
    rp.add_argument("--svg", nargs="?", const="", default=None,
                    help="write an SVG summary (default: next to the CSV)")
    return top


def resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("AL_LAB_SEED")
    if env:
        try:
            return _u64(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"AL_LAB_SEED is not a valid seed: {env!r}") from None
    return None


def _print_summary(records):
    print(f"{'run_id':<28}{'estimator':<24}{'sampler':<24}{'n':>7}{'mean':>10}{'min':>10}{'max':>10}{'reps':>6}")
    for run_id, est, smp, n, mean, lo, hi, cnt in harness.summarize(records):
        print(f"{run_id[:27]:<28}{est[:23]:<24}{smp[:23]:<24}{n:>7}{mean:>10.4f}{lo:>10.4f}{hi:>10.4f}{cnt:>6}")


def _emit(records, out_dir: Path, name: str):
    csv_path = harness.write_csv(records, out_dir / f"{name}.csv")
    svg_path = None
    if any(not r.failed for r in records):
        svg_path = report.write_svg(records, out_dir / f"{name}.svg")
    print(f"wrote {csv_path}" + (f" and {svg_path}" if svg_path else ""))
    return csv_path


def _failures(records) -> int:
    bad = [r for r in records if r.failed]
    for r in bad:
        print(f"replicate {r.replicate} failed: {r.estimator[6:]}", file=sys.stderr)
    return len(bad)


def cmd_simulate(args, seed):
    cfg = harness.load_config(args.config, seed=seed)
    records = harness.run_experiment(cfg, threads=args.threads)
    _emit(records, harness.output_dir(cfg, args.out), cfg.name)
    _print_summary(records)
    return EXIT_RUNTIME if _failures(records) else EXIT_OK


def cmd_sweep(args, seed):
    base = harness.load_config(args.config, seed=seed)
    vary = {}
    for item in args.vary:
        key, sep, vals = item.partition("=")
        if not sep or not vals:
            raise ConfigError(f"--vary expects KEY=V1,V2, got {item!r}")
        vary[key.strip()] = [v.strip() for v in vals.split(",")]
    if not vary:
        raise ConfigError("sweep needs at least one --vary")
    records = []
    for cfg in harness.sweep_configs(base, vary):
        log.info("running %s", cfg.name)
        records += harness.run_experiment(cfg, threads=args.threads)
    _emit(records, harness.output_dir(base, args.out), f"{base.name}_sweep")
    _print_summary(records)
    return EXIT_RUNTIME if _failures(records) else EXIT_OK


def _check_spec(args) -> EstimatorSpec:
    if args.estimator == "knn":
        return EstimatorSpec.knn(args.k)
    if args.estimator == "nullified":
        return EstimatorSpec.nullified(args.h, args.r_null)
    return EstimatorSpec(args.estimator, h=args.h)


def cmd_check(args, seed):
    rng = RngContract(seed or 0).stream(0, "eval")
    ok = True
    if args.gn:
        spec = _check_spec(args)
        fixed = tuple(((e,), 1) for e in args.e_points) + tuple(((f,), 0) for f in args.free_points)
        inst = theory.GnInstance(spec, tuple(args.x), args.r, fixed, args.adversaries, args.grid)
        val, placement = theory.gn_search(inst)
        print(f"g_n = {val:.6g}  ({spec.label()}, x={args.x}, r={args.r})")
        if len(placement):
            print("adversarial placement: " + ", ".join(f"{p[0]:.6g}" for p in placement))
        if args.min is not None:
            ok = val >= args.min
    elif args.cond1:
        sched = ScheduleSpec(H=args.H)
        dist = DistributionSpec(1, ConstantEta(args.eta))
        for n in args.n:
            spec = EstimatorSpec.knn(args.k) if args.estimator == "knn" else scheduled_spec(args.estimator, sched, n)
            est = theory.estimate_condition1(spec, dist, sched, n, args.r, args.mc, rng)
            print(f"n={n}: E[g_n | >= H_n E-points] ~ {est.mean:.4f} +- {est.se:.4f} "
                  f"(accepted {est.accepted}/{est.tried})")
            if args.min is not None and est.mean < args.min:
                ok = False
    else:
        if args.estimator not in ("histogram", "kernel"):
            raise ConfigError("--bounded-sup covers histogram and kernel")
        rep = theory.check_bounded_sup(args.estimator, ScheduleSpec(), args.n, args.mc, rng)
        print(f"{'n':>8}{'h':>10}{'max w':>8}{'diam':>10}{'q10':>9}{'q50':>9}{'q90':>9}")
        for r in rep.rows:
            print(f"{r.n:>8}{r.h:>10.4f}{r.max_weight:>8.3f}{r.diameter:>10.4f}"
                  f"{r.q10:>9.2f}{r.q50:>9.2f}{r.q90:>9.2f}")
        for v in rep.violations:
            print("VIOLATION: " + v)
        ok = rep.ok
    print("PASS" if ok else "FAIL")
    return EXIT_ASSERT if (args.assert_ and not ok) else EXIT_OK


def cmd_race(args, seed):
    seed = seed or 0
    ok = True
    if args.recursion:
        for p11 in args.p11:
            tab = theory.race_recursion(p11, args.coupling)
            worst = float(np.max(tab.table / tab.closed))
            print(f"p11={p11:g}: max p^(a,b) / 3^(a+b) p11^a = {worst:.4g}  {'ok' if tab.ok else 'EXCEEDED'}")
            ok &= tab.ok
    elif args.uprime:
        sched = ScheduleSpec()
        for kp in args.kprime:
            for eta in args.eta:
                res = theory.uprime_sim(sched, eta, kp, args.horizon, args.reps, seed=seed)
                print(f"k'={kp} eta={eta:g}: {len(res.violations)} violations in {res.checked_steps} "
                      f"checked steps; P(O_n > {4 if kp == 1 else 6}) = {res.p_many_open:.3f}")
                for v in res.violations[:5]:
                    print("  replicate %d step %d: O_prev=%d U=%d U'=%d" % v)
                ok &= not res.violations
    elif args.majority:
        for k in args.k:
            for eta in args.eta:
                eps = abs(1 - 2 * eta) / 8 if args.eps is None else args.eps
                res = theory.majority_bound_mc(k, eps, eta)
                print(f"k={k} eta={eta:g} eps={eps:.4g}: worst {res.worst:.4f} <= bound {res.bound:.4f}  "
                      f"{'ok' if res.ok else 'EXCEEDED'}")
                ok &= res.ok
    else:
        contract = RngContract(seed)
        for j, (i0, eta, kp) in enumerate((a, b, c) for a in args.i0 for b in args.eta for c in args.kprime):
            res = theory.race_mc(theory.RaceSpec(i0, eta, kp, mc_draws=args.draws), contract.stream(j, "z"))
            print(f"i0={i0:<6} eta={eta:<5g} k'={kp}: P(T1<T2)={res.p_less:.5f}+-{res.se_less:.5f} "
                  f"(bound {res.bound_less:.5f})  P(T1=T2)={res.p_equal:.5f}+-{res.se_equal:.5f} "
                  f"(bound {res.bound_equal:.5f})  {'ok' if res.ok else 'EXCEEDED'}")
            ok &= res.ok
    print("PASS" if ok else "FAIL")
    return EXIT_ASSERT if (args.assert_ and not ok) else EXIT_OK


def cmd_report(args, seed):
    try:
        records = harness.read_csv(args.csv)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc}") from None
    _print_summary(records)
    if args.svg is not None:
        src = Path(args.csv)
        target = Path(args.svg) if args.svg else src.with_suffix(".svg")
        if args.out:
            target = Path(args.out) / target.name
        print(f"wrote {report.write_svg(records, target)}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "check": cmd_check,
            "race": cmd_race, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        return COMMANDS[args.command](args, resolve_seed(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
