"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation (negative concentration, failed verification, ...).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import ConfigError, InvariantViolation, SolverError
from .orchestrator import resume_simulation, run_simulation
from .scenarios import scenario

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ionflow",
        description="Structure-preserving electrodiffusion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a configured simulation")
    sim.add_argument("--config", required=True, help="path to a JSON config")
    sim.add_argument("--out", default=None, help="output directory override")
    sim.add_argument("--until", type=float, default=None, help="stop time override")

    res = sub.add_parser("resume", help="continue a run from a checkpoint")
    res.add_argument("--checkpoint", required=True)
    res.add_argument("--out", default=None)
    res.add_argument("--until", type=float, default=None)

    scn = sub.add_parser("scenario", help="inspect the built-in scenario library")
    scn.add_argument("--name", required=True)
    scn.add_argument("--print-config", action="store_true")

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("--suite", required=True)

    con = sub.add_parser("convergence", help="run a manufactured-solution study")
    con.add_argument("--case", required=True)
    return parser


def _cmd_simulate(args):
    config = load_config(args.config)
    summary, sim = run_simulation(config, out_dir=args.out, until=args.until)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_resume(args):
    summary, sim = resume_simulation(args.checkpoint, out_dir=args.out,
                                     until=args.until)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_scenario(args):
    cfg = scenario(args.name)
    if args.print_config:
        print(json.dumps(cfg.echo, indent=2))
    else:
        print("scenario %r (use --print-config for the full tree)" % args.name)
    return 0


def _cmd_verify(args):
    from .verification import run_suite
    report = run_suite(args.suite)
    print(report.format_text())
    for rec in report.to_records():
        print(json.dumps(rec))
    return 0 if report.passed else EXIT_INVARIANT


def _cmd_convergence(args):
    from .verification import mms_convergence
    report = mms_convergence(args.case)
    print(report.table())
    return 0 if report.passed else EXIT_INVARIANT


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "resume": _cmd_resume,
        "scenario": _cmd_scenario,
        "verify": _cmd_verify,
        "convergence": _cmd_convergence,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print("solver failure: %s" % e, file=sys.stderr)
        return EXIT_SOLVER
    except InvariantViolation as e:
        print("invariant violation: %s" % e, file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
