"""Command-line entry point: ``subrad <experiment> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import __version__
from ..lattice import InvalidConfigError
from ..scattering import FeatureNotFoundError, GridTooNarrowError
from ..spectral import EigensolverError
from .config import U64, ConfigError, load_config
from .runners import run
from .table import write_sidecar

EXIT_OK, EXIT_FAILED_CHECK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3, 4

SUBCOMMANDS = {
    "decay-scaling": "decay_scaling",
    "spectrum": "spectrum",
    "shift": "shift",
    "fom-sweep": "fom_sweep",
    "fisher-sweep": "fisher_sweep",
    "disorder": "disorder_ensemble",
    "resolve-dd": "resolve_dd",
}
NUMERICAL = (EigensolverError, FeatureNotFoundError, GridTooNarrowError, np.linalg.LinAlgError,
             ArithmeticError, ValueError)

log = logging.getLogger("subrad")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {v}")
    return v


def _jobs(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subrad", description="Subradiant waveguide-QED sensing experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--check", action="store_true", help="run the acceptance suite and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", metavar="PATH", help="TOML experiment config")
        s.add_argument("--out", metavar="DIR", help="output directory (overrides [output])")
        s.add_argument("--seed", type=_u64, metavar="U64", help="disorder base seed")
        s.add_argument("--jobs", type=_jobs, default=1, metavar="K", help="worker processes")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="inline config override, VALUE in TOML syntax (repeatable)")
        s.add_argument("--check", action="store_true", help="run the acceptance suite instead")
    c = sub.add_parser("check", help="run the acceptance suite")
    c.add_argument("--only", metavar="C1,C2", help="comma-separated criterion keys")
    c.add_argument("--json", metavar="PATH", help="also write the results as JSON")
    return p


def _report(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")


def _configure_logging() -> None:
    level = os.environ.get("SUBRAD_LOG", "WARNING").upper()
    numeric = logging.getLevelName(level)
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def run_check(only: Optional[str] = None, json_path: Optional[str] = None) -> int:
    from .. import acceptance

    keys = None
    if only:
        keys = [k.strip().upper() for k in only.split(",") if k.strip()]
        unknown = [k for k in keys if k not in acceptance.CRITERIA]
        if unknown:
            raise UsageError(f"unknown criteria: {', '.join(unknown)}")
    results = acceptance.run_all(keys, echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if json_path:
        write_sidecar(json_path, {"version": __version__, "results": [
            {"key": r.key, "title": r.title, "passed": r.passed, "checks": r.checks,
             "metrics": r.metrics, "seconds": r.seconds} for r in results]})
    return EXIT_OK if passed == len(results) else EXIT_FAILED_CHECK


def run_experiment(args) -> int:
    kind = SUBCOMMANDS[args.command]
    cfg = load_config(kind, args.config, args.set)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_output(args.out)
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    log.info("running %s with %d job(s)", kind, args.jobs)
    result = run(cfg, args.jobs)
    written = [str(table.to_csv(out / f"{stem}.csv")) for stem, table in result.tables.items()]
    sidecar = write_sidecar(out / f"{kind}.json", {
        "experiment": kind, "version": __version__, "config": cfg.to_dict(),
        "config_path": args.config, "jobs": args.jobs, "outputs": written,
        "columns": {stem: t.header for stem, t in result.tables.items()},
        "summary": result.summary, "started_utc": started.isoformat(),
        "wall_seconds": time.perf_counter() - t0,
    })
    for path in written + [str(sidecar)]:
        print(path)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.check or args.command == "check":
            return run_check(getattr(args, "only", None), getattr(args, "json", None))
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join([*SUBCOMMANDS, "check"]))
        return run_experiment(args)
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        _report("usage", str(exc))
        return EXIT_USAGE
    except ConfigError as exc:
        _report("config", str(exc), path=exc.path)
        return EXIT_CONFIG
    except InvalidConfigError as exc:
        _report("config", str(exc))
        return EXIT_CONFIG
    except NUMERICAL as exc:
        _report("numerical", str(exc), type=type(exc).__name__)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())
