#!/usr/bin/env python3
"""
kerrsim - Driven dissipative Kerr oscillator: chain TEBD, master equation and exact
steady state.

Usage:
    python main.py steady-sweep --config run.json --out out/sweep
    python main.py evolve --config run.json --out out/evolve
    python main.py evolve --method lindblad --config run.json
    python main.py evolve --checkpoint --config run.json   # Also save the final chain states
    python main.py compare --config run.json --out out/compare
    python main.py chain-info --config run.json
    python main.py doctor                        # Environment and config sanity checks
    python main.py estimate --config run.json    # Runtime estimate for the chain evolution
    python main.py init-config run.json          # Write the default run document
    python main.py show-config --config run.json
"""
import argparse
import logging
import os
import sys
from datetime import datetime

from rich.logging import RichHandler

from kerrsim import __version__
from kerrsim.commands import (
    cmd_chain_info,
    cmd_compare,
    cmd_doctor,
    cmd_estimate,
    cmd_evolve,
    cmd_init_config,
    cmd_show_config,
    cmd_steady_sweep,
)
from kerrsim.config import load_config
from kerrsim.display import console, print_banner, print_error, print_info
from kerrsim.errors import ConfigError, KerrSimError
from kerrsim.runs import default_workers


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def parse_args(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default=None,
        metavar="PATH",
        help="JSON run document or a previous run's manifest.json (default: built-in defaults)",
    )
    common.add_argument(
        "--out",
        type=str,
        default=None,
        metavar="DIR",
        help="Output directory (default: runs/<command>_<timestamp>)",
    )
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=None,
        metavar="N",
        help="Worker count; 1 runs sequentially (default: physical cores)",
    )
    common.add_argument(
        "--seedless",
        action="store_true",
        help="Record that the run is deterministic; nothing in kerrsim draws random numbers",
    )
    common.add_argument(
        "-v", "--verbose",
        action="count",
        default=0,
        help="More log output (-vv for debug)",
    )
    common.add_argument(
        "-q", "--quiet",
        action="store_true",
        help="Only log errors",
    )

    parser = argparse.ArgumentParser(
        prog="kerrsim",
        description="Simulate a driven dissipative Kerr oscillator coupled to a flat-band bath.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    sub.add_parser(
        "steady-sweep", parents=[common],
        help="Exact steady state over the configured drive amplitudes",
    )
    evolve = sub.add_parser(
        "evolve", parents=[common],
        help="Time evolution with trajectory CSV and Wigner frames",
    )
    evolve.add_argument(
        "--method",
        choices=["tebd", "lindblad"],
        default="tebd",
        help="Chain TEBD (default) or the truncated master equation",
    )
    evolve.add_argument(
        "--checkpoint",
        action="store_true",
        help="Also save each final chain state as checkpoint[_sK].kmps (TEBD only)",
    )
    sub.add_parser(
        "compare", parents=[common],
        help="TEBD, Lindblad and closed form on one parameter point",
    )
    sub.add_parser("chain-info", parents=[common], help="Print the bath chain coefficients")
    sub.add_parser("doctor", parents=[common], help="Run environment and config checks")
    sub.add_parser("estimate", parents=[common], help="Estimate the chain evolution runtime")
    init = sub.add_parser("init-config", parents=[common], help="Write the default run document")
    init.add_argument("path", metavar="PATH", help="Where to write the JSON document")
    init.add_argument("--force", action="store_true", help="Overwrite an existing file")
    sub.add_parser("show-config", parents=[common], help="Print the effective configuration")
    return parser.parse_args(argv)


def setup_logging(verbose: int = 0, quiet: bool = False) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _default_out(command: str) -> str:
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return os.path.join("runs", f"{command.replace('-', '_')}_{timestamp}")


def run(args) -> int:
    if args.command == "init-config":
        cmd_init_config(args.path, force=args.force)
        return 0

    cfg = load_config(args.config, args.command)
    if args.command == "show-config":
        cmd_show_config(cfg, args.config)
        return 0
    if args.command == "doctor":
        cmd_doctor(cfg)
        return 0
    if args.command == "chain-info":
        cmd_chain_info(cfg)
        return 0
    if args.command == "estimate":
        cmd_estimate(cfg)
        return 0

    threads = args.threads or default_workers()
    out_dir = args.out or _default_out(args.command)
    print_banner()
    print_info(f"Output: [bold]{out_dir}[/bold]  threads: {threads}")
    if args.command == "steady-sweep":
        cmd_steady_sweep(cfg, out_dir, threads, args.seedless)
    elif args.command == "evolve":
        cmd_evolve(cfg, out_dir, threads, args.seedless, method=args.method,
                   checkpoint=args.checkpoint)
    elif args.command == "compare":
        cmd_compare(cfg, out_dir, threads, args.seedless)
    return 0


def main(argv=None):
    args = parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        code = run(args)
    except ConfigError as e:
        print_error("invalid configuration")
        for problem in e.problems:
            console.print(f"  [red]•[/red] {problem}")
        sys.exit(e.exit_code)
    except KerrSimError as e:
        print_error(str(e))
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        print_error("interrupted")
        sys.exit(130)
    sys.exit(code)


if __name__ == "__main__":
    main()
