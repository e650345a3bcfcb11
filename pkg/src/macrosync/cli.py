"""``macrosync`` command line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, resolve_config
from .experiments import DEFAULTS, EXPERIMENT_IDS, run, write_bundle
from .heatmap import SCALES, HeatmapError, export_heatmap
from .sweep import FAILURE_BUDGET

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="macrosync",
        description="Run a figure-reproducing sweep and write CSV tables, SVG heatmaps and metadata.ini.",
        epilog="'macrosync heatmap CSV --value COLUMN' renders one column of a map CSV as SVG.",
    )
    ap.add_argument("experiment", choices=EXPERIMENT_IDS)
    ap.add_argument("--config", help="INI file with [model], [integrator], [grid], [analysis] sections")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key (repeatable)")
    ap.add_argument("--out", default=None, help="output directory (default results/<experiment>)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes")
    ap.add_argument("--resolution-scale", type=float, default=1.0, help="multiply every grid resolution")
    ap.add_argument("--show-config", action="store_true", help="print the resolved config and exit")
    return ap


def _heatmap_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="macrosync heatmap")
    ap.add_argument("csv")
    ap.add_argument("--value", required=True, help="column to render")
    ap.add_argument("--x", default=None)
    ap.add_argument("--y", default=None)
    ap.add_argument("--scale", choices=SCALES, default="gray")
    ap.add_argument("--out", default=None)
    return ap


def _heatmap_main(argv: list[str]) -> int:
    args = _heatmap_parser().parse_args(argv)
    try:
        path = export_heatmap(args.csv, args.value, args.out, args.scale, args.x, args.y)
    except (HeatmapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "heatmap":
        return _heatmap_main(argv[1:])
    args = _parser().parse_args(argv)
    out = Path(args.out) if args.out else Path("results") / args.experiment
    try:
        cfg = resolve_config(
            args.experiment,
            DEFAULTS[args.experiment],
            args.config,
            args.set,
            out,
            args.workers,
            args.resolution_scale,
        )
        if args.show_config:
            sys.stdout.write(cfg.to_ini())
            return EXIT_OK
        bundle = run(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in write_bundle(bundle, out):
        print(path)
    n_failed = len(bundle.failures)
    print(f"{bundle.n_cells} cells, {n_failed} failed, {bundle.wall_time:.1f} s", file=sys.stderr)
    if bundle.failure_fraction > FAILURE_BUDGET:
        print(
            f"simulation error: {n_failed}/{bundle.n_cells} cells failed (budget {FAILURE_BUDGET:.0%})",
            file=sys.stderr,
        )
        return EXIT_SIMULATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
