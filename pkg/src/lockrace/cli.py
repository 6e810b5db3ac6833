"""Command line entry point: ``lockrace {solve,sweep,simulate,verify,oracle-check}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, checks
from .equilibrium import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    EquilibriumNotConverged,
    gamma_first_lock,
    solve_equilibrium,
)
from .model import DEFAULT_GRID_SIZE, ConfigError, GameConfig, SampledFunction, StrategyProfile
from .recursion import ContinuationValues, continuation_csv
from .simulator import dump_episodes, estimate_payoffs, simulate_batch

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CONVERGENCE = 2
EXIT_VERIFY = 3

log = logging.getLogger("lockrace")


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict | None
    grid_size: int
    tolerance: float
    max_iterations: int
    seed: int | None = None
    episodes: int | None = None
    outputs: list = field(default_factory=list)
    version: str = __version__
    wall_clock_seconds: float = 0.0


def load_config(path) -> GameConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return GameConfig.from_dict(doc)
    except ConfigError as exc:
        raise InputError(f"{path}: invalid config: {exc}") from exc


def _emit(text: str, out: str | None, manifest: RunManifest | None = None):
    if out:
        Path(out).write_text(text)
        if manifest is not None:
            manifest.outputs.append(out)
            Path(out + ".manifest.json").write_text(
                json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"
            )
    else:
        sys.stdout.write(text)


def _manifest(args, cfg, **extra) -> RunManifest:
    return RunManifest(
        command=args.command,
        config=cfg.to_dict() if cfg is not None else None,
        grid_size=args.grid,
        tolerance=args.tol,
        max_iterations=args.max_iter,
        seed=getattr(args, "seed", None),
        **extra,
    )


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    started = time.perf_counter()
    code = EXIT_OK
    try:
        result = solve_equilibrium(cfg, args.grid, args.tol, args.max_iter)
    except EquilibriumNotConverged as exc:
        result = exc.result
        code = EXIT_NO_CONVERGENCE
        log.error("%s", exc)
    manifest = _manifest(args, cfg)
    if args.dump_curves:
        Path(args.dump_curves).write_text(continuation_csv(result.continuation))
        manifest.outputs.append(args.dump_curves)
    manifest.wall_clock_seconds = time.perf_counter() - started
    _emit(json.dumps(result.to_dict(), indent=2) + "\n", args.out, manifest)
    return code


def sweep_values(start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise InputError("sweep needs at least 2 steps")
    if not start < stop:
        raise InputError("sweep range must satisfy from < to")
    return np.linspace(start, stop, steps)


def sweep_rows(cfg: GameConfig, values, grid_size, tol, max_iter, workers=None):
    def solve_one(nu):
        return nu, solve_equilibrium(cfg.with_cost_factor(nu), grid_size, tol, max_iter,
                                     raise_on_failure=False)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        solved = list(pool.map(solve_one, values))
    rows = []
    for nu, result in solved:
        for i, strategy in enumerate(result.profile):
            rows.append([float(nu), i + 1, *strategy.thresholds, result.converged])
    return rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.param != "nu":
        raise InputError(f"unsupported sweep parameter {args.param!r}")
    values = sweep_values(args.start, args.stop, args.steps)
    started = time.perf_counter()
    rows = sweep_rows(cfg, values, args.grid, args.tol, args.max_iter)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["nu", "player", *[f"theta_{k}" for k in range(1, cfg.M + 1)], "converged"])
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    manifest = _manifest(args, cfg)
    manifest.wall_clock_seconds = time.perf_counter() - started
    _emit(buf.getvalue(), args.out, manifest)
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_NO_CONVERGENCE


def _load_profile(path, cfg) -> StrategyProfile:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read profile: {exc}") from exc
    rows = [p["theta"] for p in doc["players"]] if isinstance(doc, dict) else doc
    try:
        profile = StrategyProfile.from_array(np.asarray(rows, dtype=float))
    except ValueError as exc:
        raise InputError(f"{path}: malformed profile: {exc}") from exc
    problems = profile.validate(cfg)
    if problems:
        raise InputError(f"{path}: " + "; ".join(problems))
    return profile


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    started = time.perf_counter()
    if args.profile:
        profile = _load_profile(args.profile, cfg)
    elif args.use_solved:
        try:
            profile = solve_equilibrium(cfg, args.grid, args.tol, args.max_iter).profile
        except EquilibriumNotConverged as exc:
            log.error("%s", exc)
            return EXIT_NO_CONVERGENCE
    else:
        raise InputError("give --profile PATH or --use-solved")
    est = estimate_payoffs(profile, cfg, args.episodes, args.seed)
    manifest = _manifest(args, cfg, episodes=args.episodes)
    doc = est.to_dict()
    doc["profile"] = profile.as_array().tolist()
    if args.dump_episodes:
        with open(args.dump_episodes, "w") as fh:
            dump_episodes(simulate_batch(profile, cfg, args.episodes, args.seed), fh)
        manifest.outputs.append(args.dump_episodes)
    manifest.wall_clock_seconds = time.perf_counter() - started
    _emit(json.dumps(doc, indent=2) + "\n", args.out, manifest)
    return EXIT_OK


def _corrupt(result, amount=0.01):
    """Test hook: inflate one stored continuation curve of player 1."""
    cv = result.continuation[0]
    if not cv.curves:
        return result
    curve = cv.curves[0]
    vals = curve.values.copy()
    vals *= 1.0 + amount
    bad = SampledFunction(curve.t_lo, curve.t_hi, vals)
    cv = ContinuationValues(cv.player, cv.thresholds, (bad, *cv.curves[1:]), cv.horizon,
                            cv.grid_size, cv.boundary_ties)
    return type(result)(result.profile, (cv, *result.continuation[1:]), result.iterations,
                        result.final_update_norm, result.converged, result.tolerance,
                        result.damped)


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    started = time.perf_counter()
    try:
        result = solve_equilibrium(cfg, args.grid, args.tol, args.max_iter)
    except EquilibriumNotConverged as exc:
        log.error("%s", exc)
        return EXIT_NO_CONVERGENCE
    if args.inject_corruption:
        result = _corrupt(result)
    suites = {
        "equilibrium": checks.equilibrium_suite(result, cfg, args.candidates),
        "quadrature": checks.quadrature_suite(result, cfg, seed=args.seed),
        "asymptotic": checks.asymptotic_suite(result, cfg),
        "oracle": checks.last_lock_suite(result, cfg),
    }
    report = {
        "passed": all(r.passed for rows in suites.values() for r in rows),
        "failed_suites": [name for name, rows in suites.items()
                          if not all(r.passed for r in rows)],
        "suites": {name: [asdict(r) for r in rows] for name, rows in suites.items()},
        "utilities": [
            gamma_first_lock(result.first_thresholds[i], i, result.first_thresholds,
                             result.continuation[i], cfg)
            for i in range(cfg.n)
        ],
    }
    manifest = _manifest(args, cfg)
    manifest.wall_clock_seconds = time.perf_counter() - started
    _emit(json.dumps(report, indent=2) + "\n", args.out, manifest)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_oracle_check(args) -> int:
    cases = list(checks.ORACLE_CASES) if args.case == "all" else [args.case]
    rows = []
    for case in cases:
        fn = checks.ORACLE_CASES[case]
        rows.extend(fn(args.seed) if args.instances is None else fn(args.seed, args.instances))
    for case in cases:
        mine = [r for r in rows if r.case == case]
        worst = max(r.value for r in mine)
        status = "PASS" if all(r.passed for r in mine) else "FAIL"
        print(f"{case:10s} {status}  instances={len(mine):4d}  worst={worst:.3e}")
    if args.dump:
        with open(args.dump, "w") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["case", "instance", "residual", "passed", "note"])
            for r in rows:
                writer.writerow([r.case, r.instance, repr(r.value), r.passed, r.note])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE)
    shared.add_argument("--tol", type=float, default=DEFAULT_TOL)
    shared.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", default=None, help="write here instead of stdout")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lockrace", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[shared], help="solve for the equilibrium")
    p.add_argument("config")
    p.add_argument("--dump-curves", metavar="CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[shared], help="solve over a parameter range")
    p.add_argument("config")
    p.add_argument("--param", default="nu")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[shared], help="Monte Carlo payoffs")
    p.add_argument("config")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--profile", help="JSON profile (solve output or list of rows)")
    group.add_argument("--use-solved", action="store_true")
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--dump-episodes", metavar="CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[shared], help="run the check battery")
    p.add_argument("config")
    p.add_argument("--candidates", type=int, default=400)
    p.add_argument("--inject-corruption", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle-check", parents=[shared], help="structural control checks")
    p.add_argument("--case", choices=[*checks.ORACLE_CASES, "all"], default="all")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--dump", metavar="CSV")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
