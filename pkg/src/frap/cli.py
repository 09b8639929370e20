"""Command-line front end.

Exit codes: 0 success, 1 validation failure (or unschedulable with --strict),
2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .assignment import PROTOCOLS, protocol_assignment
from .experiments import SWEEPS, ExperimentSpec, oracle_check, run_experiment
from .model import SystemFormatError, dump_system, load_system, validate, validate_assignment
from .rta import analyze
from .taskgen import US, GenConfig, generate

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: str | None):
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}", EXIT_IO)
    else:
        sys.stdout.write(text)


def _load(path: str):
    try:
        return load_system(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    except SystemFormatError as exc:
        raise CliError(str(exc), EXIT_IO)


def _load_valid(path: str):
    system, assignment = _load(path)
    problems = validate(system)
    if assignment is not None:
        problems += validate_assignment(system, assignment)
    if problems:
        raise CliError("\n".join(problems), EXIT_INVALID)
    return system, assignment


def _add_config_flags(p: argparse.ArgumentParser):
    d = GenConfig()
    g = p.add_argument_group("generation")
    g.add_argument("--processors", "-M", type=int, default=d.processors)
    g.add_argument("--tasks-per-proc", "-N", type=int, default=d.tasks_per_proc)
    g.add_argument("--accesses-max", "-A", type=int, default=d.accesses_max)
    g.add_argument("--cs-range", "-L", type=float, nargs=2, metavar=("LO", "HI"),
                   default=[d.cs_range[0] / US, d.cs_range[1] / US],
                   help="critical section length range in microseconds")
    g.add_argument("--rsf", type=float, default=d.rsf)
    g.add_argument("--resource-count", "-K", type=int, default=d.resource_count)
    g.add_argument("--total-util-factor", type=float, default=d.total_util_factor,
                   help="total utilisation per task (sum is this times M*N)")
    g.add_argument("--seed", type=int, default=d.seed)


def _config(args) -> GenConfig:
    lo, hi = args.cs_range
    return GenConfig(
        processors=args.processors,
        tasks_per_proc=args.tasks_per_proc,
        accesses_max=args.accesses_max,
        cs_range=(int(round(lo * US)), int(round(hi * US))),
        rsf=args.rsf,
        resource_count=args.resource_count,
        total_util_factor=args.total_util_factor,
        seed=args.seed,
    )


def _assignment_for(system, stored, protocol: str, mode: str):
    # frap keeps spin priorities stored in the file; presets always override
    if protocol == "frap" and stored is not None:
        return stored
    return protocol_assignment(system, protocol, mode)


def cmd_generate(args) -> int:
    config = _config(args)
    problems = config.check()
    if problems:
        raise CliError("; ".join(problems), EXIT_INVALID)
    report = generate(config)
    logging.info("generated %d tasks (%d utilisation redraws, %d access redraws, rng %s)",
                 len(report.system.tasks), report.retries, report.discarded, report.rng)
    assignment = protocol_assignment(report.system, args.protocol, args.mode) if args.protocol else None
    _emit(dump_system(report.system, assignment), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    system, assignment = _load(args.system)
    problems = validate(system)
    if assignment is not None:
        problems += validate_assignment(system, assignment)
    for p in problems:
        print(p)
    if problems:
        return EXIT_INVALID
    print(f"ok: {len(system.tasks)} tasks, {len(system.resources)} resources, "
          f"{system.processors} processors")
    return EXIT_OK


def cmd_analyze(args) -> int:
    system, stored = _load_valid(args.system)
    assignment = _assignment_for(system, stored, args.protocol, args.mode)
    report = analyze(system, assignment)
    data = report.to_dict()
    data["protocol"] = args.protocol
    _emit(json.dumps(data, indent=2) + "\n", args.out)
    if args.strict and not report.schedulable:
        return EXIT_INVALID
    return EXIT_OK


def cmd_assign(args) -> int:
    system, _ = _load_valid(args.system)
    assignment = protocol_assignment(system, args.protocol, args.mode)
    _emit(dump_system(system, assignment), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()] if args.values else []
    spec = ExperimentSpec(vary=args.vary, values=values, base=_config(args), systems=args.systems,
                          protocols=tuple(args.protocols.split(",")), seed=args.seed, mode=args.mode)
    problems = spec.check()
    if problems:
        raise CliError("\n".join(problems), EXIT_INVALID)
    stream = sys.stdout
    if args.out:
        try:
            stream = open(args.out, "w", newline="")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    try:
        run_experiment(spec, workers=args.workers, out=stream,
                       progress=lambda msg: logging.info("%s", msg))
    finally:
        if stream is not sys.stdout:
            stream.close()
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    tally = oracle_check(args.count, args.max_items, args.seed, dump=args.dump)
    print(f"{tally.equal}/{tally.checked} equal")
    if tally.counterexample:
        print(f"first counterexample: {tally.counterexample}")
    return EXIT_OK if tally.ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def protocol_flags(p, default="frap"):
        p.add_argument("--protocol", choices=PROTOCOLS, default=default)
        p.add_argument("--mode", choices=("approx", "exact"), default="approx",
                       help="overload test used by the frap assignment search")

    p = sub.add_parser("generate", help="generate a random system")
    _add_config_flags(p)
    protocol_flags(p, default=None)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a system file")
    p.add_argument("system")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="response-time analysis of a system file")
    p.add_argument("system")
    protocol_flags(p)
    p.add_argument("--out", "-o")
    p.add_argument("--strict", action="store_true", help="exit 1 if the system is unschedulable")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("assign", help="write spin priorities into a system file")
    p.add_argument("system")
    protocol_flags(p)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("experiment", help="schedulability sweep over one generation parameter")
    _add_config_flags(p)
    p.add_argument("--vary", choices=sorted(SWEEPS), required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values (L is the upper bound in microseconds)")
    p.add_argument("--systems", type=int, default=200)
    p.add_argument("--protocols", default=",".join(PROTOCOLS))
    p.add_argument("--mode", choices=("approx", "exact"), default="approx")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle-check", help="compare the flow solver with exhaustive search")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--max-items", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump", default="counterexample.net")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
