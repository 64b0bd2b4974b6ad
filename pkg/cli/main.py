from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from engine.settings import load_settings
from shared import CSV_SCHEMA_VERSION, __version__
from shared.contracts import run_config_from
from shared.errors import ConfigError, DscError

from .compare import DEFAULT_REL_FLOOR, DEFAULT_TAU_STAR, compare
from .figures import figure
from .runner import ExperimentRunner
from .sweep import sweep

logger = logging.getLogger(__name__)

# RunConfig fields exposed as flags of the same name
_RUN_FLAGS: list[tuple[str, Any]] = [
    ("engine", str),
    ("hamiltonian_mode", str),
    ("g_over_omega", float),
    ("kappa_over_omega", float),
    ("delta_over_omega", float),
    ("omega0_over_omega", float),
    ("tau_max", float),
    ("tau_step", float),
    ("n_max", int),
    ("n_traj", int),
    ("master_seed", int),
    ("n_report", int),
    ("initial_qubit", str),
    ("initial_photons", int),
    ("dt", float),
    ("rtol", float),
    ("workers", int),
    ("output", str),
]
_FIGURE_OVERRIDES = ("tau_step", "n_max", "n_traj", "master_seed", "n_report", "dt", "rtol", "workers")


def configure_logging(level: Optional[str] = None) -> None:
    root = logging.getLogger()
    if root.handlers:
        return
    logging.basicConfig(
        level=getattr(logging, (level or load_settings().log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    )


def _add_run_flags(parser: argparse.ArgumentParser, names: Optional[Sequence[str]] = None) -> None:
    for name, kind in _RUN_FLAGS:
        if names is None or name in names:
            parser.add_argument(f"--{name}", type=kind, default=None)
    if names is None:
        parser.add_argument("--track_purity", action="store_true", default=None)


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    names = [name for name, _ in _RUN_FLAGS] + ["track_purity"]
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsc", description="Dissipative quantum Rabi model experiments.")
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__} (csv schema {CSV_SCHEMA_VERSION})",
    )
    parser.add_argument("--log_level", default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment into a CSV + JSON sidecar")
    run.add_argument("--config", default=None, help="RunConfig JSON file or a previous run's sidecar")
    _add_run_flags(run)

    fig = commands.add_parser("figure", help="emit every curve of a figure preset")
    fig.add_argument("preset_id", type=int)
    fig.add_argument("--output_dir", default=None)
    _add_run_flags(fig, _FIGURE_OVERRIDES)

    cmp_ = commands.add_parser("compare", help="compare one column of two CSV runs")
    cmp_.add_argument("csv_a")
    cmp_.add_argument("csv_b")
    cmp_.add_argument("--column", default="mean_photon")
    cmp_.add_argument("--metric", choices=["max_abs", "rel_at_tau", "max_rel"], default="max_abs")
    cmp_.add_argument("--tau_star", type=float, default=DEFAULT_TAU_STAR)
    cmp_.add_argument("--tau_limit", type=float, default=None)
    cmp_.add_argument("--floor", type=float, default=DEFAULT_REL_FLOOR)
    cmp_.add_argument("--interpolate", action="store_true")

    swp = commands.add_parser("sweep", help="Cartesian sweep over g, kappa and delta")
    swp.add_argument("--config", default=None)
    swp.add_argument("--g_values", type=float, nargs="+", default=None)
    swp.add_argument("--kappa_values", type=float, nargs="+", default=None)
    swp.add_argument("--delta_values", type=float, nargs="+", default=None)
    swp.add_argument("--output_dir", default=None)
    swp.add_argument("--sweep_workers", type=int, default=None)
    _add_run_flags(swp)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    settings = load_settings()
    runner = ExperimentRunner(settings)
    if args.command == "run":
        config = run_config_from(_load_config_file(args.config), _overrides(args))
        path = runner.run_to_file(config)
        logger.info("cli.run.done path=%s", path)
        print(path)
    elif args.command == "figure":
        directory = figure(args.preset_id, args.output_dir or settings.output_dir, runner, _overrides(args))
        logger.info("cli.figure.done dir=%s", directory)
        print(directory)
    elif args.command == "compare":
        report = compare(
            args.csv_a,
            args.csv_b,
            column=args.column,
            metric=args.metric,
            tau_star=args.tau_star,
            tau_limit=args.tau_limit,
            floor=args.floor,
            interpolate=args.interpolate,
        )
        print(report.model_dump_json(indent=2))
    elif args.command == "sweep":
        base_arguments = _load_config_file(args.config)
        overrides = _overrides(args)
        # sweep axes replace the single values; seed the base with the first point
        for flag, key in (("g_values", "g_over_omega"), ("kappa_values", "kappa_over_omega"), ("delta_values", "delta_over_omega")):
            values = getattr(args, flag)
            if values:
                overrides[key] = values[0]
        base = run_config_from(base_arguments, overrides)
        paths = sweep(
            base,
            args.output_dir or settings.output_dir,
            g_values=args.g_values,
            kappa_values=args.kappa_values,
            delta_values=args.delta_values,
            workers=args.sweep_workers or settings.workers,
            runner=runner,
        )
        for path in paths:
            print(path)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return _dispatch(args)
    except (ConfigError, ValidationError) as exc:
        logger.error("cli.%s.config_error %s", args.command, exc)
        return 2
    except DscError as exc:
        logger.exception("cli.%s.failed exit_code=%s", args.command, exc.exit_code)
        return exc.exit_code
    except ValueError as exc:
        logger.error("cli.%s.invalid %s", args.command, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
