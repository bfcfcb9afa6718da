"""Command line entry point: ``squintbook run|validate|export-channel``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .channel import save_channel
from .config import ConfigError, load_config, validate_document
from .sweep import build_channel, run_sweep, write_artifacts

logger = logging.getLogger("squintbook")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    for d in cfg.diagnostics:
        logger.warning("%s", d)
    out = args.out or cfg.output_dir
    result = run_sweep(cfg, workers=args.workers)
    summary = write_artifacts(result, out)
    if not args.no_plots:
        from .plotting import render_figures

        render_figures(result, out)
    infeasible = [p for p in summary["points"] if p["status"] != "ok"]
    for p in infeasible:
        logger.warning("infeasible point: bandwidth %g GHz, %s, sigma2 %s dB",
                       p["bandwidth_ghz"], p["baseline"], p["sigma2_db"])
    print(f"wrote {out} ({len(summary['points'])} sweep points, {len(infeasible)} infeasible)")
    return 0


def _cmd_validate(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: <document>: {exc}")
        return 1
    diags = validate_document(doc)
    for d in diags:
        print(d)
    return 1 if any(d.level == "error" for d in diags) else 0


def _cmd_export(args) -> int:
    cfg = load_config(args.config)
    bw = args.bandwidth_index
    if not 0 <= bw < len(cfg.bandwidths_hz):
        print(f"error: --bandwidth-index must be in [0, {len(cfg.bandwidths_hz) - 1}]", file=sys.stderr)
        return 2
    save_channel(build_channel(cfg, bw), args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squintbook", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="design codebooks and run the configured sweep")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)

    exp = sub.add_parser("export-channel", help="write the self-interference channel to a .cht file")
    exp.add_argument("config")
    exp.add_argument("out")
    exp.add_argument("--bandwidth-index", type=int, default=0)
    exp.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
