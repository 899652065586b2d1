"""Command-line wiring: parser factory and ``run(argv)`` returning the exit status."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from funess.cli.commands.figures import cmd_figures
from funess.cli.commands.simulate import cmd_simulate, cmd_walk
from funess.cli.commands.verify import cmd_verify
from funess.cli.manifest import IoFailureError, write_manifest
from funess.cli.schemas import ConfigError, RunConfig, load_config, resolve_threads
from funess.i18n import LANGUAGES, t
from funess.services.verification import VerificationReport

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2

COMMANDS = ("figures", "verify", "simulate", "walk")


def create_parser(lang: str = "en") -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funess", description=t("cli.description", lang))
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=t(f"command.{name}", lang))
        cmd.add_argument("--config", type=Path, default=None, help="JSON run configuration (or a manifest.json)")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", type=Path, default=None, help="output directory")
        cmd.add_argument("--n", type=int, default=None, dest="n_trajectories", help="number of trajectories")
        cmd.add_argument("--quick", action="store_true", default=None, help="skip Monte Carlo checks")
        cmd.add_argument("--lang", choices=sorted(LANGUAGES), default=lang)
        verbosity = cmd.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true")
        verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _print_report(report: VerificationReport, lang: str) -> None:
    for check in report.checks:
        status = "skip" if check.skipped else "pass" if check.passed else "fail"
        line = f"[{t(f'status.{status}', lang)}] {check.name:<22} residual={check.residual:.3e} tol={check.tolerance:.1e}"
        if check.detail:
            line += f"  {check.detail}"
        print(f"{line}  {t(f'check.{check.name}', lang)}")
    skipped = sum(check.skipped for check in report.checks)
    if report.passed:
        print(t("cli.verify_passed", lang).format(count=len(report.checks), skipped=skipped))
    else:
        print(t("cli.verify_failed", lang).format(failed=len(report.failures), count=len(report.checks)))


def _run_verify(config: RunConfig, workers: int, lang: str) -> int:
    report, path = cmd_verify(config, workers)
    _print_report(report, lang)
    write_manifest(config, "verify", [path])
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def _file_command(handler: Callable[[RunConfig, int], List[Path]], name: str) -> Callable[[RunConfig, int, str], int]:
    def run_command(config: RunConfig, workers: int, lang: str) -> int:
        files = handler(config, workers)
        manifest = write_manifest(config, name, files)
        print(t("cli.wrote", lang).format(count=len(files) + 1, out=manifest.parent))
        return EXIT_OK

    return run_command


HANDLERS: Dict[str, Callable[[RunConfig, int, str], int]] = {
    "figures": _file_command(lambda config, workers: cmd_figures(config), "figures"),
    "verify": _run_verify,
    "simulate": _file_command(cmd_simulate, "simulate"),
    "walk": _file_command(cmd_walk, "walk"),
}


def run(argv: Optional[List[str]] = None) -> int:
    args = create_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    lang = args.lang
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "n_trajectories": args.n_trajectories,
        "quick": args.quick,
    }
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(t("cli.config_error", lang).format(error=exc), file=sys.stderr)
        return EXIT_CONFIG

    workers = resolve_threads(config)
    logger.debug("Running %s with %d worker thread(s)", args.command, workers)
    try:
        return HANDLERS[args.command](config, workers, lang)
    except IoFailureError as exc:
        print(t("cli.io_error", lang).format(error=exc), file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(t("cli.invalid_input", lang).format(error=exc), file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())
