"""Command-line entry point: ``forager {simulate,verify,sweep,oracle} CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import Kind, load_config
from .errors import ConfigError
from .experiments import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, run_experiment

log = logging.getLogger("forager")

VERIFY_KINDS = (Kind.VERIFY_THEOREM13, Kind.VERIFY_THEOREM14)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forager", description="Forager-exploiter chemotaxis simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run a simulation and write diagnostics",
        "verify": "run a convergence verification (kind taken from the config or inferred from the supply)",
        "sweep": "run a parameter sweep and write a regime map",
        "oracle": "compare a homogeneous run against the ODE reference",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to the JSON configuration")
        p.add_argument("--out", help="output directory (overrides output_dir in the config)")
        p.add_argument("--seed", type=int, default=None, help="reserved; the scheme is deterministic")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def _resolve_kind(command: str, cfg) -> Kind:
    if command == "simulate":
        return Kind.SIMULATE
    if command == "sweep":
        return Kind.SWEEP
    if command == "oracle":
        return Kind.ORACLE_COMPARE
    if cfg.kind in VERIFY_KINDS:
        return cfg.kind
    from .model import positive_constant_rate

    return Kind.VERIFY_THEOREM14 if positive_constant_rate(cfg.supply) is not None else Kind.VERIFY_THEOREM13


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config)
        cfg = replace(cfg, kind=_resolve_kind(args.command, cfg))
        if cfg.kind is Kind.SWEEP and not cfg.axes:
            raise ConfigError("sweep.axes", "a sweep needs one or two axes")
        log.info("running %s -> %s", cfg.kind.value, args.out or cfg.output_dir)
        report = run_experiment(cfg, args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    summary = report.summary
    if summary.get("solver_error"):
        e = summary["solver_error"]
        print(f"solver error: {e['type']} at t={e['t']}: {e['message']}", file=sys.stderr)
    if "verdict" in summary:
        log.info("verdict: %s", summary["verdict"])
        for name, check in summary.get("checks", {}).items():
            log.info("  %-18s %s", name, "pass" if check.get("passed") else "FAIL")
    if "counts" in summary:
        for name, count in summary["counts"].items():
            log.info("  %-24s %d", name, count)
    for path in report.artifacts:
        log.info("wrote %s", path)
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
