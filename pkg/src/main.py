import argparse
import sys
from typing import List, Optional

from src.api import commands
from src.core.config import VERSION, settings
from src.core.logging import set_level

RUN_MODES = ("compile", "compare", "discover")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Decompose, compare and discover quantum gate sets.",
        epilog=(
            "Config defaults: weights [50,1,1,1,0]; pipeline SKD/KAK/QSD with basis_depth 6, "
            "recursion 2, rd_trials 500, rd_max_length 20, kak_max_apps 3, metric process; "
            "search derivative-free-local with max_evals 500, restarts 1. "
            "Run 'forge schema' for the full schema."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    for mode in RUN_MODES:
        p = sub.add_parser(mode, help=f"run in {mode} mode")
        p.add_argument("--config", required=True, help="TOML run config or a run manifest.json")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default {settings.THREADS})")
        p.add_argument("--out", default=None, help=f"output directory (default {settings.OUTPUT_DIR}/<label>)")
        p.add_argument("--verbose", action="store_true", help="log per-point results")

    p = sub.add_parser("validate", help="validate a config and print the effective values")
    p.add_argument("--config", required=True)
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        return commands.schema()
    if args.command == "validate":
        return commands.validate(args.config)
    if args.verbose:
        set_level("DEBUG")
    return commands.run_from_file(args.config, args.command, args.seed, args.threads, args.out)


if __name__ == "__main__":
    sys.exit(main())
