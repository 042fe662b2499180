"""Command-line entry point.

    agrivol run        --config cfg.json [--out DIR] [--seed N]
    agrivol <stage>    --config cfg.json [--out DIR] [--seed N] [--scenario S]

Stages: ingest, trend, fit-egarch, fit-sarimax, forecast, price, report.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric/fit error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, DataError, FitError, NumericError, StageError
from .pipeline import STAGES, cmd_stage, run_pipeline


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agrivol",
        description="Climate-driven crop price volatility and MSP put premium pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run every stage")
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name != "run":
            p.add_argument("--scenario", default=None, help="restrict to one scenario label")
    return parser


def _exit_code(e: BaseException) -> int:
    if isinstance(e, ConfigError):
        return 2
    if isinstance(e, DataError):
        return 3
    if isinstance(e, (NumericError, FitError)):
        return 4
    return 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "run":
            report = run_pipeline(cfg)
            for entry in report.stages:
                print(f"[{entry['name']}] ok ({entry['seconds']}s)")
            print(f"report: {report.report_path}")
        else:
            files = cmd_stage(cfg, args.command, getattr(args, "scenario", None))
            for f in files:
                print(f)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e.cause)
    except (ConfigError, DataError, NumericError, FitError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
