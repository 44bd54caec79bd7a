"""Command-line driver.

Subcommands: run (simulate a scenario to CSV), gen (write a random
scenario), verify (five-house regression suite), oracle (global-optimum gap
report at desk scale). Exit codes: 0 success, 1 validation failure or failed
checks, 2 usage or runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, io, reference
from .engine import Engine, OracleSizeError, build_flow_graph, global_optimum_oracle
from .io import ScenarioError
from .model import MICROGRID_MEAN, validate_scenario
from .scenario import DEFAULT_TOPOLOGY, TopologyParams, random_scenario
from .verify import all_checks, load_bundled


def _alpha_mode(text: str):
    if text == MICROGRID_MEAN:
        return text
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(
            f"expected '{MICROGRID_MEAN}' or a number, got {text!r}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridsim", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write timeseries CSVs")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--ticks", type=int, default=None, help="override the horizon")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument(
        "--out",
        default=os.environ.get("GRIDSIM_OUT", "out"),
        help="output directory (default $GRIDSIM_OUT or ./out)",
    )
    run.add_argument("--feedback-rounds", type=int, default=None)
    run.add_argument("--alpha-mode", type=_alpha_mode, default=None)
    run.add_argument("--granularity", type=int, default=None)
    run.add_argument("--beta", type=Fraction, default=None)

    gen = sub.add_parser("gen", help="write a seeded random scenario")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--houses", type=int, default=5)
    gen.add_argument("--producers", type=int, default=2)
    gen.add_argument("--out", required=True, help="scenario file to write")
    gen.add_argument("--houses-per-microgrid", type=int, default=DEFAULT_TOPOLOGY.houses_per_microgrid)
    gen.add_argument("--devices-min", type=int, default=DEFAULT_TOPOLOGY.devices_min)
    gen.add_argument("--devices-max", type=int, default=DEFAULT_TOPOLOGY.devices_max)
    gen.add_argument("--horizon", type=int, default=DEFAULT_TOPOLOGY.horizon)

    sub.add_parser("verify", help="run the bundled five-house regression checks")

    oracle = sub.add_parser("oracle", help="report the gap to the global optimum")
    oracle.add_argument("--scenario", default=None, help="scenario JSON (default: bundled five-house)")
    oracle.add_argument("--ticks", type=int, default=1)

    return parser


def _load(args) -> "io.ScenarioConfig":
    cfg = io.load_scenario(args.scenario)
    overrides = {}
    for name, attr in (
        ("seed", "seed"),
        ("feedback_rounds", "feedback_rounds"),
        ("alpha_mode", "alpha_mode"),
        ("granularity", "granularity"),
        ("beta", "beta"),
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, attr, value)
            overrides[name] = str(value)
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioError(problems)
    return cfg, overrides


def cmd_run(args) -> int:
    cfg, overrides = _load(args)
    ticks = args.ticks if args.ticks is not None else cfg.horizon
    if ticks < 1:
        print("ticks must be >= 1", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = io.build_manifest(
        args.scenario, cfg.seed, ticks, out_dir, overrides, __version__
    )
    io.write_manifest(manifest, out_dir)

    engine = Engine(cfg)
    results = engine.run(ticks)
    edge_meta = [(engine.graph.tails[i], engine.graph.heads[i]) for i in range(engine.graph.num_edges)]
    io.write_timeseries(results, out_dir, edges=edge_meta)
    last = results[-1]
    print(
        f"{len(results)} ticks: supply {last.supply} Wh, demand {last.demand} Wh, "
        f"gap {last.gap}, unserved {last.unserved_mandatory}, spilled {last.spilled}"
    )
    print(f"results in {out_dir}")
    return 0


def cmd_gen(args) -> int:
    params = TopologyParams(
        houses_per_microgrid=args.houses_per_microgrid,
        devices_min=args.devices_min,
        devices_max=args.devices_max,
        horizon=args.horizon,
    )
    cfg = random_scenario(args.seed, args.houses, args.producers, params)
    io.write_scenario(cfg, args.out)
    print(f"wrote {args.out}: {len(cfg.houses)} houses, {len(cfg.producers)} producers")
    return 0


def cmd_verify(_args) -> int:
    checks = all_checks()
    failed = 0
    for label, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"{status} {label}: {detail}")
        failed += not ok
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def cmd_oracle(args) -> int:
    if args.scenario:
        cfg = io.load_scenario(args.scenario)
    else:
        cfg = load_bundled(reference.FIVE_HOUSE_SCENARIO)
        problems = validate_scenario(cfg)
        if problems:
            raise ScenarioError(problems)
    engine = Engine(cfg)
    for _ in range(args.ticks):
        result = engine.tick()
        try:
            optimum = global_optimum_oracle(engine.houses, result.deliverable)
        except OracleSizeError as exc:
            print(f"scenario too large for the oracle: {exc}", file=sys.stderr)
            return 1
        gap = optimum - result.achieved_utility
        print(
            f"tick {result.tick}: achieved utility {result.achieved_utility}, "
            f"global optimum {optimum}, gap {gap}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "gen": cmd_gen,
        "verify": cmd_verify,
        "oracle": cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"scenario error: {problem}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
