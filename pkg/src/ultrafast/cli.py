"""Command-line entry point: ``ultrafast {simulate,poincare,verify,localize}``.

Exit statuses: 0 success, 1 property violation, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .errors import ConfigurationError, UltrafastError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultrafast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "run one decay experiment"),
        ("poincare", "discrete Poincare constants under grid refinement"),
        ("verify", "check the functional inequalities on random fields"),
        ("localize", "truncation ladder convergence study"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", metavar="DIR", default=None)
        p.add_argument("--jobs", type=int, default=1)
        if name == "verify":
            p.add_argument("--samples", type=int, default=None)
    return parser


def _dispatch(args) -> str:
    overrides = {} if args.seed is None else {"seed": args.seed}
    config = harness.ExperimentConfig.load(args.config, **overrides)
    out = args.out or config["output.dir"]
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be at least 1")
    if args.command == "simulate":
        return str(harness.cmd_simulate(config, out))
    if args.command == "poincare":
        table = harness.cmd_poincare(config, out, args.jobs)
        return f"C_P extrapolated = {table.limit!r}"
    if args.command == "verify":
        rep = harness.cmd_verify(config, args.samples, None, out, args.jobs)
        return f"{rep.n_passed}/{rep.n_samples} samples pass"
    study = harness.cmd_localize(config, out, args.jobs)
    return f"ladder monotone: {study.monotone()}"


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        message = _dispatch(args)
    except (UltrafastError, OSError) as err:
        if isinstance(err, OSError):
            err = ConfigurationError(str(err))
        out = args.out
        record = harness.write_error_record(out, err) if out else {
            "error": type(err).__name__, "message": str(err), "exit_status": err.exit_status}
        print(json.dumps(record), file=sys.stderr)
        return err.exit_status
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
