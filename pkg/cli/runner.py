from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Union

import numpy as np

from engine import analytic
from engine.mcwf import TrajectorySpec, run_ensemble
from engine.mesolve import EvolutionMonitor, EvolutionSpec, evolve
from engine.model import basis_state, projector
from engine.observables import measure
from engine.settings import EngineSettings, load_settings
from engine.stepper import StepControl
from shared import CSV_SCHEMA_VERSION, __version__
from shared.contracts import FockSpace, RunConfig, RunMetadata, run_config_from
from shared.errors import ConfigError
from shared.grids import tau_grid

from .csv_io import STDERR_PREFIX, column_order, write_run

logger = logging.getLogger(__name__)


@dataclass
class RunOutput:
    columns: dict[str, np.ndarray]
    metadata: RunMetadata


def measured_columns(
    states: Iterable[tuple[float, np.ndarray]],
    space: FockSpace,
    n_report: int,
) -> dict[str, np.ndarray]:
    rows: dict[str, list[float]] = {name: [] for name in column_order(n_report)}
    for t, rho in states:
        obs = measure(rho, space)
        rows["tau"].append(t)
        rows["mean_photon"].append(obs.mean_photon)
        rows["p_g"].append(obs.p_g)
        rows["p_e"].append(obs.p_e)
        rows["purity"].append(obs.purity)
        for n in range(n_report + 1):
            rows[f"chain_plus_{n}"].append(float(obs.chain_plus[n]))
            rows[f"chain_minus_{n}"].append(float(obs.chain_minus[n]))
    return {name: np.asarray(values, dtype=float) for name, values in rows.items()}


class ExperimentRunner:
    def __init__(self, settings: Optional[EngineSettings] = None) -> None:
        self.settings = settings or load_settings()
        self._handlers: dict[str, Callable[[RunConfig], RunOutput]] = {
            "analytic": self._run_analytic,
            "mesolve": self._run_mesolve,
            "mcwf": self._run_mcwf,
        }

    def _space(self, config: RunConfig) -> FockSpace:
        space = FockSpace(n_max=config.n_max or self.settings.n_max)
        if config.n_report > space.n_max:
            raise ConfigError(f"n_report={config.n_report} exceeds n_max={space.n_max}")
        if config.initial_photons > space.n_max:
            raise ConfigError(f"initial_photons={config.initial_photons} exceeds n_max={space.n_max}")
        return space

    def _metadata(self, config: RunConfig, columns: list[str], **fields: Any) -> RunMetadata:
        params = config.to_params()
        return RunMetadata(
            engine=config.engine,
            config=config.model_dump(mode="json"),
            parameters=params.model_dump(),
            code_version=__version__,
            schema_version=CSV_SCHEMA_VERSION,
            columns=columns,
            validity_horizon=analytic.validity_horizon(params),
            **fields,
        )

    def _run_analytic(self, config: RunConfig) -> RunOutput:
        if config.initial_photons != 0:
            raise ConfigError("the analytic solution starts from the mode vacuum; initial_photons must be 0")
        params = config.to_params()
        model = analytic.AnalyticModel.from_params(params, config.initial_qubit)
        grid = tau_grid(config.tau_max, config.tau_step)
        horizon = analytic.validity_horizon(params)
        if horizon is not None and config.tau_max > horizon:
            logger.warning("runner.analytic.validity tau_max=%s horizon=%.3f delta=%s", config.tau_max, horizon, params.delta)
        columns = analytic.series(model, grid, config.n_report)
        return RunOutput(columns=columns, metadata=self._metadata(config, column_order(config.n_report)))

    def _run_mesolve(self, config: RunConfig) -> RunOutput:
        space = self._space(config)
        psi0 = basis_state(space, config.initial_qubit, config.initial_photons)
        spec = EvolutionSpec(
            hamiltonian_mode=config.hamiltonian_mode,
            params=config.to_params(),
            space=space,
            t_grid=tau_grid(config.tau_max, config.tau_step),
            initial=projector(psi0),
            step_control=StepControl(dt=config.dt or self.settings.mesolve_dt, rtol=config.rtol),
        )
        monitor = EvolutionMonitor()
        columns = measured_columns(evolve(spec, monitor=monitor), space, config.n_report)
        metadata = self._metadata(config, column_order(config.n_report), truncation=monitor.as_dict())
        return RunOutput(columns=columns, metadata=metadata)

    def _run_mcwf(self, config: RunConfig) -> RunOutput:
        space = self._space(config)
        spec = TrajectorySpec(
            hamiltonian_mode=config.hamiltonian_mode,
            params=config.to_params(),
            space=space,
            t_grid=tau_grid(config.tau_max, config.tau_step),
            dt=config.dt or self.settings.mcwf_dt,
            n_report=config.n_report,
            track_purity=config.track_purity,
        )
        psi0 = basis_state(space, config.initial_qubit, config.initial_photons)
        result = run_ensemble(
            psi0,
            spec,
            n_traj=config.n_traj,
            master_seed=config.master_seed,
            workers=config.workers or self.settings.workers,
        )
        columns: dict[str, np.ndarray] = {"tau": result.t_grid}
        columns.update(result.mean)
        columns["purity"] = result.purity if result.purity is not None else np.full(result.t_grid.shape, np.nan)
        for name, values in result.stderr.items():
            columns[f"{STDERR_PREFIX}{name}"] = values
        metadata = self._metadata(
            config,
            column_order(config.n_report, with_stderr=True),
            master_seed=config.master_seed,
            stderr_defined=result.stderr_defined,
            truncation=result.truncation(),
            extras={
                "jump_count_mean": result.jump_count_mean,
                "jump_count_stderr": result.jump_count_stderr,
                "first_jump_mean": result.first_jump_mean,
                "first_jump_stderr": result.first_jump_stderr,
                "trajectories_with_jumps": result.trajectories_with_jumps,
            },
        )
        return RunOutput(columns=columns, metadata=metadata)

    def execute(self, config: Union[RunConfig, dict, str]) -> RunOutput:
        resolved = config if isinstance(config, RunConfig) else run_config_from(config)
        handler = self._handlers.get(resolved.engine)
        if handler is None:
            raise ConfigError(f"Unsupported engine: {resolved.engine}")
        logger.info(
            "runner.execute.start engine=%s mode=%s g=%s kappa=%s delta=%s",
            resolved.engine,
            resolved.hamiltonian_mode,
            resolved.g_over_omega,
            resolved.kappa_over_omega,
            resolved.delta,
        )
        output = handler(resolved)
        logger.info("runner.execute.done engine=%s rows=%s", resolved.engine, len(output.columns["tau"]))
        return output

    def run_to_file(
        self,
        config: Union[RunConfig, dict, str],
        path: Optional[Union[str, Path]] = None,
        chosen: Optional[list[str]] = None,
        stated: Optional[list[str]] = None,
        overridden: Optional[list[str]] = None,
    ) -> Path:
        resolved = config if isinstance(config, RunConfig) else run_config_from(config)
        target = path or resolved.output
        if target is None:
            target = Path(self.settings.output_dir) / f"{resolved.engine}.csv"
        output = self.execute(resolved)
        output.metadata.chosen = list(chosen or [])
        output.metadata.stated = list(stated or [])
        output.metadata.overridden = list(overridden or [])
        logger.info("runner.run_to_file.done path=%s chosen=%s", target, ",".join(output.metadata.chosen) or "-")
        return write_run(target, output.columns, output.metadata)


def run(
    config: Union[RunConfig, dict, str],
    path: Optional[Union[str, Path]] = None,
    settings: Optional[EngineSettings] = None,
) -> Path:
    """Run one experiment and write its CSV + sidecar; returns the CSV path."""
    return ExperimentRunner(settings or load_settings()).run_to_file(config, path)
