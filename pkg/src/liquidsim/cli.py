"""Command-line entry point: ``liquidsim <command> [--config PATH] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .config import PAPER_EPISODES, ExperimentConfig, load_config
from .errors import ConfigError, LiquidSimError

log = logging.getLogger("liquidsim")

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2

PRESETS = {
    "analytic": experiments.analytic_preset,
    "train": experiments.train_preset,
    "evaluate": experiments.evaluate_preset,
    "fig2": experiments.fig2_preset,
    "fig3": experiments.fig3_preset,
    "fig4": experiments.fig4_preset,
    "fig5": experiments.fig5_preset,
}
COMMANDS = ("analytic", "verify-theorems", "train", "evaluate", "fig2", "fig3", "fig4", "fig5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liquidsim", description="Multi-agent optimal liquidation experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="YAML config file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override training.seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory for CSV files")
    episodes = parser.add_mutually_exclusive_group()
    episodes.add_argument("--episodes", type=int, help="override training.episodes")
    episodes.add_argument("--paper-episodes", action="store_true", help=f"train for {PAPER_EPISODES} episodes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_command(command: str, cfg: ExperimentConfig, out: Path) -> tuple[int, list]:
    """Run one command; returns (exit status, written CSV artifacts)."""
    out = Path(out)
    if command == "verify-theorems":
        report, artifacts = experiments.theorem_preset(cfg, out)
        for case in report.cases:
            log.info("%s %s margin=%.6g %s", case.theorem, case.description, case.margin,
                     "PASS" if case.passed else "FAIL")
        return (EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED), artifacts
    return EXIT_OK, PRESETS[command](cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
        episodes = PAPER_EPISODES if args.paper_episodes else args.episodes
        cfg = experiments.with_overrides(cfg, episodes=episodes, seed=args.seed)
        status, artifacts = run_command(args.command, cfg, args.out)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except LiquidSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    for a in artifacts:
        print(f"wrote {a.path} ({a.rows} rows)")
    return status


if __name__ == "__main__":
    sys.exit(main())
