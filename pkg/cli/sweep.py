from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

from shared.contracts import RunConfig, run_config_from
from shared.errors import ConfigError

from .runner import ExperimentRunner

logger = logging.getLogger(__name__)


def point_name(config: RunConfig) -> str:
    return f"{config.engine}_g{config.g_over_omega:g}_k{config.kappa_over_omega:g}_d{config.delta:g}.csv"


def sweep_configs(
    base: RunConfig,
    g_values: Optional[Sequence[float]] = None,
    kappa_values: Optional[Sequence[float]] = None,
    delta_values: Optional[Sequence[float]] = None,
) -> list[RunConfig]:
    """Cartesian product over g, kappa and delta; an empty axis keeps the base value."""
    gs = list(g_values or [base.g_over_omega])
    kappas = list(kappa_values or [base.kappa_over_omega])
    deltas = list(delta_values or [base.delta])
    configs = [
        run_config_from(
            base.model_dump(),
            {"g_over_omega": g, "kappa_over_omega": kappa, "delta_over_omega": delta},
        )
        for g, kappa, delta in itertools.product(gs, kappas, deltas)
    ]
    names = [point_name(config) for config in configs]
    if len(set(names)) != len(names):
        raise ConfigError("sweep values produce duplicate file names")
    return configs


def sweep(
    base: RunConfig,
    output_dir: Union[str, Path],
    g_values: Optional[Sequence[float]] = None,
    kappa_values: Optional[Sequence[float]] = None,
    delta_values: Optional[Sequence[float]] = None,
    workers: int = 1,
    runner: Optional[ExperimentRunner] = None,
) -> list[Path]:
    """Run every point into its own CSV; the returned paths follow the product order."""
    configs = sweep_configs(base, g_values, kappa_values, delta_values)
    runner = runner or ExperimentRunner()
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    logger.info("sweep.run.start points=%s workers=%s dir=%s", len(configs), workers, directory)

    def one(config: RunConfig) -> Path:
        return runner.run_to_file(config, directory / point_name(config))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        paths = list(pool.map(one, configs))
    logger.info("sweep.run.done points=%s", len(paths))
    return paths
