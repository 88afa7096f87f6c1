"""Command-line harness: ``fe3sim <experiment> [--config FILE] [--check] [--out DIR]``.

Exit codes: 0 success, 2 invalid configuration, 3 computation failure,
4 reference check failed (only with ``--check``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .constants import constants_dict
from .experiments import EXPERIMENTS, RUNNERS, ConfigError, build_config, write_csv, write_gnuplot
from .references import compare_reference, load_references

log = logging.getLogger("fe3sim")

OUT_ENV = "FE3SIM_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_CHECK = 0, 2, 3, 4


def run(experiment: str, config_file=None, overrides=(), out=None, check=False) -> int:
    """Run one experiment end to end and return the process exit code."""
    out = out or os.environ.get(OUT_ENV)
    try:
        cfg = build_config(experiment, config_file, overrides, out)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        result = RUNNERS[experiment](cfg)
    except Exception as exc:  # any numerical failure maps to one exit code
        log.error("%s failed: %s", experiment, exc)
        return EXIT_COMPUTE
    wall = time.perf_counter() - start

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        path = cfg.output_dir / f"{name}.csv"
        write_csv(path, table)
        written.append(path.name)
    for name, blocks in result.blocks.items():
        write_gnuplot(cfg.output_dir / name, blocks)
        written.append(name)

    code = EXIT_OK
    report = None
    if check:
        checks = compare_reference(result.results, load_references(experiment))
        for c in checks:
            print(c.line())
        report = [
            {
                "name": c.record.name,
                "measured": c.measured,
                "expected": c.record.expected,
                "tolerance": c.record.tolerance,
                "comparison": c.record.comparison,
                "provenance": c.record.provenance,
                "passed": c.passed,
            }
            for c in checks
        ]
        if not all(c.passed for c in checks):
            code = EXIT_CHECK

    manifest = {
        "experiment": experiment,
        "config": cfg.as_dict(),
        "constants": constants_dict(),
        "wall_time_s": wall,
        "versions": {
            "fe3sim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": written,
        "results": result.results,
        **result.extra_json,
    }
    if report is not None:
        manifest["check"] = report
    with open(cfg.output_dir / f"{experiment}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
    log.info("%s finished in %.2f s; outputs in %s", experiment, wall, cfg.output_dir)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fe3sim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="TOML configuration file")
        sp.add_argument("--out", type=Path, help=f"output directory (env {OUT_ENV}, default ./out)")
        sp.add_argument("--check", action="store_true", help="compare against bundled reference values")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a configuration value (repeatable)")
    sp = sub.add_parser("check", help="run every experiment with defaults and check all references")
    sp.add_argument("--out", type=Path, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.experiment == "check":
        codes = [run(e, out=args.out, check=True) for e in EXPERIMENTS]
        return max(codes)
    return run(args.experiment, args.config, args.overrides, args.out, args.check)


if __name__ == "__main__":
    sys.exit(main())
