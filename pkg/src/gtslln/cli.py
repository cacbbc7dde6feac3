"""Config-driven experiment runner.

Usage::

    gtslln run CONFIG.json [--out DIR] [--seed S] [--horizon N]
    gtslln suite SUITE.json [--out DIR] [--workers W]
    gtslln validate CONFIG.json

Exit status: 0 success, 1 a declared check failed, 2 configuration error,
3 collateral violation. Outputs go to ``--out`` or ``$GTSLLN_OUTPUT_ROOT``
(default ``out``), one directory per experiment.

Config (JSON, ``schema_version`` 1)::

    name        experiment name (output subdirectory)
    game        "single" | "hedge_set" | "mz"
    measure     pricing measure {"kind": "discrete"|"laplace"|"pareto", ...}
    hedge, nu, c, truncate_at_horizon     single-hedge game
    r, denominator, weight_exponent       mz game
    depth, epsilon, enforce_ceiling
    strategy    {"id": ..., "upcrossing": {"a": .., "b": ..}}
    reality     {"id": ..., ...}
    horizon, seed, runs, rng ("philox4x64-v1")
    mode        "trajectory" (default) | "doob" (with "doob": {"c", "runs"})
    reports     {"trajectory": bool, "detectors": bool, "ladder": bool, "stride": int}
    checks      {"min_decade_slope": x, "max_capital": {"bound": b, "min_fraction": f},
                 "count_ratio": {"reference": "nu_log_n"|"expected", "factor": 2}}
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import (
    detectors_for,
    doob_check,
    event_membership,
    growth_report,
    write_detectors_csv,
)
from .errors import CollateralViolation, ConfigurationError, GameError
from .hedges import check_coherence, measure_from_config, price_hedge, validate_single_hedge
from .reality import RNG_NAME, Adversary, reality_from_config
from .strategies import (
    CountableHedgeContext,
    MZContext,
    SingleHedgeContext,
    UpcrossingStrategy,
    build_strategy,
    hedge_from_config,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_COLLATERAL = 0, 1, 2, 3
BATCH_ROWS = 20
GAMES = ("single", "hedge_set", "mz")


def output_root(cli_value: Optional[str] = None) -> Path:
    return Path(cli_value or os.environ.get("GTSLLN_OUTPUT_ROOT", "out"))


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigurationError(f"missing field {key!r}")
    return cfg[key]


@dataclass
class Experiment:
    """A validated config with its context, strategy and Reality built."""

    cfg: dict
    name: str
    game: str
    horizon: int
    seed: int
    runs: int
    ctx: object
    strategy: object
    reality: object
    measure: object = None


def build_experiment(cfg: dict, seed: Optional[int] = None, horizon: Optional[int] = None) -> Experiment:
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(f"schema_version must be {SCHEMA_VERSION}")
    if cfg.get("rng", RNG_NAME) != RNG_NAME:
        raise ConfigurationError(f"rng: only {RNG_NAME!r} is supported")
    name = str(_require(cfg, "name"))
    game = _require(cfg, "game")
    if game not in GAMES:
        raise ConfigurationError(f"game: expected one of {GAMES}, got {game!r}")
    horizon = int(horizon if horizon is not None else _require(cfg, "horizon"))
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    seed = int(seed if seed is not None else cfg.get("seed", 0))
    runs = int(cfg.get("runs", 1))
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    measure = measure_from_config(cfg["measure"]) if "measure" in cfg else None
    depth = int(cfg.get("depth", 64))
    eps = cfg.get("epsilon")
    enforce = bool(cfg.get("enforce_ceiling", True))

    if game == "single":
        hedge = hedge_from_config(_require(cfg, "hedge"))
        if "nu" in cfg:
            nu = float(cfg["nu"])
        elif measure is not None:
            nu = price_hedge(measure, hedge)
        else:
            raise ConfigurationError("single game needs 'nu' or a 'measure'")
        ctx = SingleHedgeContext(hedge, nu, c=float(cfg.get("c", 0.0)), epsilon=eps,
                                 horizon=horizon if cfg.get("truncate_at_horizon") else None,
                                 enforce_ceiling=enforce)
    elif measure is None:
        raise ConfigurationError(f"game {game!r} needs a 'measure'")
    elif game == "hedge_set":
        ctx = CountableHedgeContext.from_measure(measure, depth, epsilon=eps, enforce_ceiling=enforce)
    else:
        ctx = MZContext.from_measure(measure, float(_require(cfg, "r")), depth, epsilon=eps,
                                     denominator=cfg.get("denominator", "root"),
                                     weight_exponent=cfg.get("weight_exponent"), enforce_ceiling=enforce)

    scfg = _require(cfg, "strategy")
    strategy = build_strategy(_require(scfg, "id"), ctx)
    if "upcrossing" in scfg:
        up = scfg["upcrossing"]
        strategy = UpcrossingStrategy(strategy, float(up["a"]), float(up["b"]), up.get("initial_capital"))
    reality = reality_from_config(_require(cfg, "reality"), seed, measure)
    if cfg.get("mode", "trajectory") not in ("trajectory", "doob"):
        raise ConfigurationError("mode: expected 'trajectory' or 'doob'")
    if cfg.get("mode") == "doob" and not isinstance(reality, Adversary):
        raise ConfigurationError("mode 'doob' needs an adversary reality (prop1 or propA3)")
    return Experiment(cfg, name, game, horizon, seed, runs, ctx, strategy, reality, measure)


@dataclass
class ExperimentResult:
    name: str
    status: int
    message: str
    lines: list = field(default_factory=list)


def _paths(exp: Experiment, ids) -> np.ndarray:
    if hasattr(exp.reality, "paths"):
        return exp.reality.paths(exp.horizon, list(ids))
    return np.stack([exp.reality.path(exp.horizon, i) for i in ids])


def _detector_ladder(exp: Experiment):
    if exp.game == "hedge_set":
        return exp.ctx.calls(exp.horizon + 2)
    if exp.game == "mz":
        return exp.ctx.roots(exp.horizon + 2)
    return None


def _write_ladders(exp: Experiment, outdir: Path) -> None:
    if exp.game == "hedge_set":
        exp.ctx.ladder.to_csv(outdir / "ladder.csv")
    elif exp.game == "mz":
        exp.ctx.ladder_1r.to_csv(outdir / "ladder_1r.csv")
        exp.ctx.ladder_2r.to_csv(outdir / "ladder_2r.csv")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def run_experiment(exp: Experiment, out_root: Path) -> ExperimentResult:
    outdir = out_root / exp.name
    outdir.mkdir(parents=True, exist_ok=True)
    reports = {"trajectory": True, "detectors": True, "ladder": True, "stride": 1}
    reports.update(exp.cfg.get("reports", {}))
    checks = exp.cfg.get("checks", {})
    lines = [
        f"experiment: {exp.name}",
        f"game: {exp.game}",
        f"strategy: {exp.strategy.name}",
        f"reality: {exp.reality.name}",
        f"horizon: {exp.horizon}",
        f"seed: {exp.seed}",
        f"rng: {RNG_NAME}",
    ]
    failures = []
    if reports["ladder"]:
        _write_ladders(exp, outdir)

    if exp.cfg.get("mode") == "doob":
        d = exp.cfg.get("doob", {})
        rep = doob_check(exp.strategy, exp.reality, float(d.get("c", 10.0)), int(d.get("runs", exp.runs)), exp.horizon)
        lines.append(rep.summary())
        if not rep.passes:
            failures.append("Doob check: CI lower edge exceeds 1/c")
        cr = checks.get("count_ratio")
        if cr:
            ref = exp.reality.spec.nu * math.log(exp.horizon) if cr.get("reference") == "nu_log_n" else rep.expected_threshold_count
            ratio = rep.mean_threshold_count / ref
            ok = 1.0 / cr.get("factor", 2.0) <= ratio <= cr.get("factor", 2.0)
            lines.append(f"threshold count / reference = {ratio:.6g} ({'ok' if ok else 'FAIL'})")
            if not ok:
                failures.append("threshold count outside factor")
        (outdir / "doob.txt").write_text(rep.summary() + "\n")
        return _finish(exp, outdir, lines, failures)

    k0 = exp.strategy.initial_capital
    within = 0
    slopes = []
    min_cap = math.inf
    for start in range(0, exp.runs, BATCH_ROWS):
        ids = range(start, min(exp.runs, start + BATCH_ROWS))
        x = _paths(exp, ids)
        traj = exp.strategy.trajectory(x)
        try:
            traj.check_collateral(k0)
        except CollateralViolation as v:
            v.run += start
            lines.append(f"collateral violation: round {v.round}, run {v.run}, K = {_fmt(v.capital)}")
            (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
            return ExperimentResult(exp.name, EXIT_COLLATERAL, str(v), lines)
        min_cap = min(min_cap, float(np.min(traj.capital)))
        if hasattr(exp.strategy, "lower_bound"):
            lb = exp.strategy.lower_bound(x)
            if np.any(traj.capital < lb - 1e-7 * np.maximum(1.0, np.abs(lb))):
                failures.append("capital fell below the strategy's proof lower bound")
        logk = np.atleast_2d(traj.log_k)
        slopes.extend(growth_report(row).decade_slope for row in logk)
        mc = checks.get("max_capital")
        if mc:
            within += int(np.sum(np.max(logk, axis=1) <= math.log(float(mc["bound"]) * k0)))
        if start == 0:
            first = traj.row(0)
            if reports["trajectory"]:
                first.to_csv(outdir / "trajectory.csv", stride=int(reports["stride"]))
            g = growth_report(first.log_k)
            lines += [
                f"run 0 final K: {_fmt(first.capital[-1])}",
                f"run 0 log K_N: {_fmt(g.log_final)}",
                f"run 0 decade slope log K_N - log K_(N/10): {_fmt(g.decade_slope)} ({g.trend}, {g.label})",
                f"run 0 max K / final K: {_fmt(g.max_over_final)}",
            ]
            if reports["detectors"]:
                dets = detectors_for(exp.game, hedge=getattr(exp.ctx, "hedge", None), ladder=_detector_ladder(exp),
                                     r=getattr(exp.ctx, "r", None), c=getattr(exp.ctx, "c", 0.0))
                series = {d.event_id: d.series(first.moves) for d in dets}
                write_detectors_csv(outdir / "detectors.csv", series, exp.horizon)
                for eid, s in series.items():
                    mem = event_membership(eid, s)
                    lines.append(f"event {eid}: partial {_fmt(mem.partial)}, last-decade increment "
                                 f"{_fmt(mem.last_decade_increment)}, converges: {mem.converges} ({mem.label})")
    lines.append(f"runs: {exp.runs}; min K over all runs and rounds: {_fmt(min_cap)}")
    if "min_decade_slope" in checks:
        worst = min(slopes)
        ok = worst > float(checks["min_decade_slope"])
        lines.append(f"min decade slope over runs: {_fmt(worst)} ({'ok' if ok else 'FAIL'})")
        if not ok:
            failures.append("decade slope below threshold")
    mc = checks.get("max_capital")
    if mc:
        frac = within / exp.runs
        ok = frac >= float(mc.get("min_fraction", 0.95))
        lines.append(f"fraction of runs with max K <= {mc['bound']:g} K_0: {frac:.6g} ({'ok' if ok else 'FAIL'})")
        if not ok:
            failures.append("max-capital fraction below threshold")
    return _finish(exp, outdir, lines, failures)


def _finish(exp, outdir, lines, failures) -> ExperimentResult:
    status = EXIT_CHECK if failures else EXIT_OK
    lines.append("status: " + ("FAIL: " + "; ".join(failures) if failures else "ok"))
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
    return ExperimentResult(exp.name, status, "; ".join(failures) or "ok", lines)


def run_config(cfg: dict, out_root: Path, seed=None, horizon=None) -> ExperimentResult:
    try:
        exp = build_experiment(cfg, seed, horizon)
    except ConfigurationError as exc:
        return ExperimentResult(str(cfg.get("name", "?")), EXIT_CONFIG, f"configuration error: {exc}")
    try:
        return run_experiment(exp, out_root)
    except CollateralViolation as v:
        return ExperimentResult(exp.name, EXIT_COLLATERAL, str(v))
    except ConfigurationError as exc:
        return ExperimentResult(exp.name, EXIT_CONFIG, f"configuration error: {exc}")


# --------------------------------------------------------------------------
# suites

EXPECT = {"pass": EXIT_OK, "check_failure": EXIT_CHECK, "config_error": EXIT_CONFIG,
          "collateral_violation": EXIT_COLLATERAL}


def _suite_entry(args):
    entry, base, out_root, seed = args
    if "path" in entry:
        cfg = load_config(Path(base) / entry["path"])
    else:
        cfg = entry["config"] if "config" in entry else entry
    return run_config(cfg, Path(out_root), seed=seed)


def run_suite(suite: dict, base: Path, out_root: Path, workers: int = 1, seed=None):
    """Run every experiment; each must end with its declared status."""
    if suite.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(f"suite schema_version must be {SCHEMA_VERSION}")
    entries = suite.get("experiments", [])
    if not entries:
        warnings.warn("empty suite: nothing to run")
        return True, []
    for e in entries:
        if e.get("expect", "pass") not in EXPECT:
            raise ConfigurationError(f"expect: unknown {e.get('expect')!r}")
    jobs = [(e, str(base), str(out_root), seed) for e in entries]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_suite_entry, jobs))
    else:
        results = [_suite_entry(j) for j in jobs]
    rows = []
    ok_all = True
    for e, res in zip(entries, results):
        want = EXPECT[e.get("expect", "pass")]
        ok = res.status == want
        ok_all &= ok
        rows.append((res.name, res.status, want, ok, res.message))
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "suite_report.txt", "w") as fh:
        for name, got, want, ok, msg in rows:
            fh.write(f"{'PASS' if ok else 'FAIL'} {name}: status {got} (expected {want}) {msg}\n")
        fh.write(f"suite: {'PASS' if ok_all else 'FAIL'}\n")
    return ok_all, rows


# --------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gtslln", description="Game-theoretic strong-law experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--horizon", type=int)
    s = sub.add_parser("suite", help="run a suite of experiments")
    s.add_argument("suite")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return p


def _validate(cfg: dict) -> int:
    exp = build_experiment(cfg)
    print(f"config {exp.name}: ok ({exp.game}, strategy {exp.strategy.name}, reality {exp.reality.name})")
    if exp.game == "single":
        rep = validate_single_hedge(exp.ctx.hedge, exp.ctx.c)
        print(f"hedge {exp.ctx.hedge.label}: A1 {rep.a1}, A2 {rep.a2}, A3 {rep.a3} ({rep.a3_method}), c_eff {rep.c_effective:g}")
        return EXIT_OK
    ladders = [exp.ctx.ladder] if exp.game == "hedge_set" else [exp.ctx.ladder_1r, exp.ctx.ladder_2r]
    status = EXIT_OK
    for lad in ladders:
        rep = check_coherence(lad, tol=1e-6)
        print(f"ladder {lad.family}: coherence {'pass' if rep.ok else 'fail'}" + "".join(f"\n  {f}" for f in rep.failures))
        if not rep.ok:
            status = EXIT_CHECK
    return status


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(load_config(args.config))
        if args.command == "run":
            res = run_config(load_config(args.config), output_root(args.out), args.seed, args.horizon)
            print("\n".join(res.lines) if res.lines else res.message)
            return res.status
        suite = load_config(args.suite)
        ok, rows = run_suite(suite, Path(args.suite).parent, output_root(args.out), args.workers, args.seed)
        for name, got, want, good, msg in rows:
            print(f"{'PASS' if good else 'FAIL'} {name}: status {got} (expected {want})")
        print("suite:", "PASS" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_CHECK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
