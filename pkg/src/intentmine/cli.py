"""Command-line driver.

Each subcommand runs one pipeline stage. Exit codes: 0 success, 2 bad
configuration, 3 unreadable/malformed input data, 1 other runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, InputFormatError, IntentMineError
from .pipeline import STAGES

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentmine",
        description="Mine customer interactions into an intent taxonomy "
        "and query-to-question mappings.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for name, fn in STAGES.items():
        p = sub.add_parser(name, help=fn.__doc__ or name)
        p.add_argument("--config", help="pipeline config TOML (defaults apply if omitted)")
        p.add_argument("--in", dest="in_path", help="override [paths].input")
        p.add_argument("--out", dest="out_dir", help="override [paths].out_dir")
        # Only cluster parallelizes today (per cohort); other stages accept
        # the flag for a uniform surface and run sequentially.
        p.add_argument("--threads", type=int, default=1, help="intra-stage parallelism bound")
        if name == "extract-intents":
            p.add_argument(
                "--channel",
                choices=["search", "call", "live_chat", "virtual_assistant"],
                help="restrict intent extraction to one channel",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        if args.in_path:
            cfg.paths.input = args.in_path
        if args.out_dir:
            cfg.paths.out_dir = args.out_dir
        cfg.validate()
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        stage = STAGES[args.stage]
        if args.stage == "cluster":
            stage(cfg, threads=args.threads)
        elif args.stage == "extract-intents":
            stage(cfg, channel=args.channel)
        else:
            stage(cfg)
    except ConfigError as exc:
        print(f"intentmine: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputFormatError as exc:
        print(f"intentmine: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IntentMineError as exc:
        print(f"intentmine: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
