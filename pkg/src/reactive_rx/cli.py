"""Command-line entry point ``reactive-rx``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure in any
module, 4 comparison failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__, harness
from .errors import ConfigError, ReactiveRxError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STRICT = 0, 2, 3, 4


def _build_parser():
    parser = argparse.ArgumentParser(prog="reactive-rx", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--strict", action="store_true", help="exit 4 if a comparison fails its tolerance")
        p.add_argument("--jobs", type=int, default=1, help="sweep points run concurrently")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")

    run = sub.add_parser("run", help="run an experiment spec file")
    run.add_argument("spec_file", type=Path)
    common(run)

    sub.add_parser("check", help="run the built-in invariant and oracle checks")

    for fig in (2, 3):
        p = sub.add_parser(f"figure{fig}", help=f"reference sweep preset {fig}")
        p.add_argument("--scale", choices=sorted(harness.SCALES), default="desk")
        p.add_argument("--modes", default="analytic,simulate,compare",
                       help="comma-separated subset of analytic,oracle,simulate,compare")
        p.add_argument("--workers", type=int, default=1, help="processes per ensemble")
        common(p)
    return parser


def _report(manifest, strict):
    for rec in manifest.records:
        status = "error" if rec.error else {False: "FAIL", True: "pass"}.get(rec.passed, "n/a" if rec.mode == "compare" else "ok")
        point = " ".join(f"{k}={v:g}" for k, v in rec.point.items()) or "-"
        print(f"[{status}] {rec.mode:<8} {point} {rec.file or rec.error}")
    print(f"manifest: {manifest.path}")
    if manifest.errors:
        return EXIT_NUMERIC
    if strict and manifest.failed_comparisons:
        return EXIT_STRICT
    return EXIT_OK


def _run_spec(spec, args):
    changes = {}
    if args.out is not None:
        changes["outputs"] = args.out
    if args.seed is not None:
        if spec.sim is None:
            raise ConfigError("--seed given but the experiment has no simulation")
        changes["sim"] = dataclasses.replace(spec.sim, master_seed=args.seed)
    if changes:
        spec = dataclasses.replace(spec, **changes)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    manifest = harness.run_experiment(spec, jobs=args.jobs)
    return _report(manifest, args.strict)


def _check():
    failed = 0
    for name, ok, detail in harness.builtin_checks():
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
        failed += not ok
    return EXIT_NUMERIC if failed else EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            return _check()
        if args.command == "run":
            spec = harness.load_spec(args.spec_file)
        else:
            modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
            spec = harness.figure_spec(int(args.command[-1]), args.scale, seed=args.seed or 1,
                                       modes=modes, sim_workers=args.workers)
        return _run_spec(spec, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReactiveRxError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
