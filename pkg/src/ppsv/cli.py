"""Command-line interface.

Subcommands::

    ppsv verify   SCENARIO  statistical verification of every (state, slot)
    ppsv oracle   SCENARIO  exact probabilities (discrete deviations only)
    ppsv gen                write a synthetic scenario file
    ppsv validate SCENARIO  structural + semantic checks, no sampling

Exit codes: 0 success, 1 I/O failure, 2 malformed input or invalid
parameters, 3 exact oracle not applicable to the scenario.

The master seed defaults to the ``PPSV_SEED`` environment variable (0 when
unset); ``--seed`` overrides it.  ``PPSV_BACKEND`` picks the sampling kernel
implementation (numba/numpy/auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .approximation import ParameterError, make_params
from .engine import DEFAULT_BATCH_SIZE, RunError
from .model import validate
from .oracle import OracleInapplicableError
from .scenario_io import (
    GenConfig,
    ScenarioFormatError,
    dump_scenario,
    generate_scenario,
    load_scenario,
    scenario_to_dict,
)
from .verifier import (
    InvalidScenarioError,
    oracle_csv,
    oracle_report,
    verify,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_ORACLE = 3


def _seed_default() -> int:
    raw = os.environ.get("PPSV_SEED", "").strip()
    if not raw:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ParameterError(f"PPSV_SEED={raw!r} is not an integer")


def _parse_seed(text: str) -> int:
    return int(text, 0)  # accepts decimal and 0x... forms


def _out_paths(stem: str, fmt: str) -> tuple[str | None, str | None]:
    for suffix in (".json", ".csv"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    jpath = stem + ".json" if fmt in ("json", "both") else None
    cpath = stem + ".csv" if fmt in ("csv", "both") else None
    return jpath, cpath


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_verify(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    params = make_params(args.epsilon, args.delta)
    seed = args.seed if args.seed is not None else _seed_default()
    report = verify(scenario, params, seed, workers=args.workers,
                    batch_size=args.batch_size, lookahead=args.lookahead,
                    family_wise=args.family_wise)
    jpath, cpath = _out_paths(args.out, args.format)
    if jpath:
        _write(jpath, report.to_json())
    if cpath:
        _write(cpath, report.to_csv())
    det = report.deterministic
    rt = report.runtime
    n_bot = sum(1 for e in det["entries"] if e["verdict"] == "bot")
    print(f"verified {len(det['entries'])} (state, slot) entries: "
          f"{len(det['entries']) - n_bot} estimates, {n_bot} bot")
    for e in det["entries"]:
        ival = f"[{e['slot_lo_kw']:g}, {e['slot_hi_kw']:g})"
        if e["verdict"] == "estimate":
            print(f"  {e['state']:>8} {ival:>20}  mean={e['mean']:.6g}  "
                  f"samples={e['samples']}")
        else:
            print(f"  {e['state']:>8} {ival:>20}  bot (p < {det['entry_epsilon']:g})  "
                  f"samples={e['samples']}")
    print(f"seed={det['master_seed']}  epsilon={det['epsilon']:g}  "
          f"delta={det['delta']:g}  backend={rt['backend']}  "
          f"workers={rt['workers']}  wall={rt['wall_seconds']:.3f}s")
    for p in (jpath, cpath):
        if p:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    report = oracle_report(scenario)
    jpath, cpath = _out_paths(args.out, args.format)
    if jpath:
        _write(jpath, json.dumps(report, indent=2, sort_keys=True) + "\n")
    if cpath:
        _write(cpath, oracle_csv(report))
    for e in report["deterministic"]["entries"]:
        ival = f"[{e['slot_lo_kw']:g}, {e['slot_hi_kw']:g})"
        print(f"  {e['state']:>8} {ival:>20}  p={e['mean']:.12g}")
    for p in (jpath, cpath):
        if p:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _seed_default()
    cfg = GenConfig(seed=seed, n_users=args.users, n_time_slots=args.time_slots,
                    n_states=args.states, n_power_slots=args.power_slots,
                    family=args.family, rel_magnitude=args.rel_magnitude)
    scenario = generate_scenario(cfg)
    if args.out == "-":
        json.dump(scenario_to_dict(scenario), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        dump_scenario(scenario, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    violations = validate(scenario)
    if violations:
        for v in violations:
            print(f"{v.path}: {v.message}", file=sys.stderr)
        print(f"invalid: {len(violations)} violation(s)", file=sys.stderr)
        return EXIT_INVALID
    n_states = len(scenario.substation.states)
    print(f"valid: {len(scenario.users)} users, {scenario.n_time_slots} time slots, "
          f"{n_states} states, {scenario.slots.n_slots} power slots")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppsv",
        description="Statistical verification of aggregated power demand: "
                    "per-(state, power-slot) landing probabilities with "
                    "(epsilon, delta) guarantees, or exact results where "
                    "deviations are discrete.")
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="estimate all (state, slot) probabilities")
    pv.add_argument("scenario", help="scenario JSON file")
    pv.add_argument("--epsilon", type=float, default=0.1,
                    help="relative accuracy target in (0, 1) (default 0.1)")
    pv.add_argument("--delta", type=float, default=0.05,
                    help="failure probability bound in (0, 1) (default 0.05)")
    pv.add_argument("--seed", type=_parse_seed, default=None,
                    help="master seed (default: PPSV_SEED or 0)")
    pv.add_argument("--workers", type=int, default=1,
                    help="sampling threads (default 1)")
    pv.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE,
                    help=f"samples per generated batch (default {DEFAULT_BATCH_SIZE})")
    pv.add_argument("--lookahead", type=int, default=None,
                    help="max speculative batches per task (default 2*workers)")
    pv.add_argument("--family-wise", action="store_true",
                    help="split delta across entries so the whole table is "
                         "jointly correct with confidence 1-delta")
    pv.add_argument("--out", default="report",
                    help="output path stem (default 'report')")
    pv.add_argument("--format", choices=("json", "csv", "both"), default="json",
                    help="report format(s) to write (default json)")
    pv.set_defaults(func=cmd_verify)

    po = sub.add_parser("oracle", help="exact probabilities (discrete deviations only)")
    po.add_argument("scenario", help="scenario JSON file")
    po.add_argument("--out", default="oracle",
                    help="output path stem (default 'oracle')")
    po.add_argument("--format", choices=("json", "csv", "both"), default="json",
                    help="report format(s) to write (default json)")
    po.set_defaults(func=cmd_oracle)

    pg = sub.add_parser("gen", help="generate a synthetic scenario")
    pg.add_argument("--out", default="-",
                    help="output file (default '-' for stdout)")
    pg.add_argument("--seed", type=_parse_seed, default=None,
                    help="generator seed (default: PPSV_SEED or 0)")
    pg.add_argument("--users", type=int, default=8)
    pg.add_argument("--time-slots", type=int, default=24)
    pg.add_argument("--states", type=int, default=3)
    pg.add_argument("--power-slots", type=int, default=6)
    pg.add_argument("--family",
                    choices=("discrete", "uniform", "truncated_gaussian", "mixed"),
                    default="mixed")
    pg.add_argument("--rel-magnitude", type=float, default=0.15,
                    help="deviation half-width relative to user load (default 0.15)")
    pg.set_defaults(func=cmd_gen)

    pc = sub.add_parser("validate", help="check a scenario file without sampling")
    pc.add_argument("scenario", help="scenario JSON file")
    pc.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        src = getattr(args, "scenario", "<input>")
        print(f"error: {src}: JSON parse error at line {exc.lineno} "
              f"column {exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_INVALID
    except (ScenarioFormatError, InvalidScenarioError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OracleInapplicableError as exc:
        print(f"error: exact oracle not applicable: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))
