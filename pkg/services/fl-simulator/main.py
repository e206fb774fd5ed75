"""
FEEL Wireless Simulator - Command Line Entry Point
Subcommands: run (one experiment), bound (convergence-bound sweep), validate (config check)
"""
import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import BoundError, ConfigError
from app.core.logging_config import get_logger, setup_logging
from app.models.schemas import SimConfig
from app.services.bound import SWEEP_PARAMS, reference_regime, sweep, with_param
from app.services.simulation import run as run_simulation
from app.utils.config_loader import check_values, read_values, validate_config
from app.utils.trace_writer import write_csv_atomic

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

BOUND_COLUMNS = ["t", "tau", "P_dl", "bound"]


def parse_values(text: str) -> List[float]:
    """Comma-separated numbers; an empty string gives an empty list."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fl-simulator",
        description=f"{settings.SERVICE_NAME} v{settings.VERSION}",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    # run: flags mirror config keys and override the file
    run_p = sub.add_parser("run", help="Run one experiment and write its trace CSV")
    run_p.add_argument("--config", "-f", type=str, default=None, help="KEY=value config file")
    run_p.add_argument("--output", "-o", type=str, default=None, help="Trace CSV path")
    run_p.add_argument("--workers", type=int, default=None, help="Threads for device loops")
    for name, field in SimConfig.model_fields.items():
        run_p.add_argument(f"--{name}", dest=f"key_{name}", default=None, help=field.description)

    bound_p = sub.add_parser("bound", help="Sweep the analog-downlink convergence bound")
    bound_p.add_argument("--vary", required=True, help=f"Parameter to sweep: {', '.join(sorted(SWEEP_PARAMS))}")
    bound_p.add_argument("--values", required=True, type=parse_values, help="Comma-separated values")
    bound_p.add_argument("--Pdl", type=float, default=10.0, help="Downlink power P^dl")
    bound_p.add_argument("--tau", type=int, default=1, help="Local steps")
    bound_p.add_argument("--iid", action="store_true", help="iid regime (G2=10, Gamma=5)")
    bound_p.add_argument("--T", type=int, default=settings.BOUND_HORIZON, help="Rounds")
    bound_p.add_argument("--eta-decay", type=float, default=1e-3)
    for name in ("mu", "L", "G2", "Gamma", "Z2", "M", "sigma_dl", "init_gap"):
        bound_p.add_argument(f"--{name}", type=float, default=None)
    bound_p.add_argument("--output-dir", "-o", type=str, default=settings.OUTPUT_DIR)
    bound_p.set_defaults(usage=bound_p.format_usage())

    val_p = sub.add_parser("validate", help="Check a config file without running it")
    val_p.add_argument("config", type=str)
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    if args.config:
        values, lines = read_values(args.config)
    for name in SimConfig.model_fields:
        flag = getattr(args, f"key_{name}")
        if flag is not None:
            values[name.lower()] = flag
            lines.pop(name.lower(), None)

    config, errors, warnings = check_values(values, lines)
    for line, key, message in warnings:
        logger.warning(f"line {line}: {key}: {message}" if line else f"{key}: {message}")
    if errors:
        raise ConfigError(errors)

    output = args.output or str(
        Path(settings.OUTPUT_DIR) / f"trace_{config.downlink.value}_{config.uplink.value}_seed{config.seed}.csv"
    )
    path = run_simulation(config, output, num_workers=args.workers)
    print(path)
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    if args.vary not in SWEEP_PARAMS:
        print(args.usage, end="", file=sys.stderr)
        raise BoundError(f"unknown parameter {args.vary!r}; choose from {', '.join(sorted(SWEEP_PARAMS))}")
    template = reference_regime(iid=args.iid, P_dl=args.Pdl, tau=args.tau, eta_decay=args.eta_decay)
    for name in ("mu", "L", "G2", "Gamma", "Z2", "M", "sigma_dl", "init_gap"):
        value = getattr(args, name)
        if value is not None:
            template = with_param(template, name, value)

    out_dir = Path(args.output_dir)
    field = SWEEP_PARAMS[args.vary]
    columns = BOUND_COLUMNS if field in ("tau", "P_dl") else BOUND_COLUMNS + ["value"]
    for value in args.values:
        rows = sweep(template, args.vary, [value], args.T)
        label = f"{value:g}"
        path = write_csv_atomic(out_dir / f"bound_{field}_{label}.csv", columns, rows)
        print(path)
    if not args.values:
        logger.info("No values given; nothing written")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    errors, warnings = validate_config(args.config)
    for line, key, message in errors:
        print(f"error: line {line}: {key}: {message}" if line else f"error: {key}: {message}")
    for line, key, message in warnings:
        print(f"warning: line {line}: {key}: {message}" if line else f"warning: {key}: {message}")
    if errors:
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bound": cmd_bound, "validate": cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(e.format(), file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, BoundError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
