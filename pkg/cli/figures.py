"""Figure presets.

Each preset lists every run behind one figure. Parameters printed in the figure
captions are recorded as ``stated`` in the sidecar; everything else the preset
had to pick (time spans, grid steps, truncation, unstated sweep values) is
recorded as ``chosen``.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from shared.contracts import RunConfig, run_config_from
from shared.errors import ConfigError

from .compare import DEFAULT_TAU_STAR, compare
from .csv_io import FLOAT_FORMAT
from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

DETUNINGS = (0.75, 0.5, 0.25, 0.0)
_FIG5_TAU_LIMIT = 9.0


class CurveSpec(BaseModel):
    model_config = ConfigDict(extra="ignore")

    name: str
    config: RunConfig
    stated: list[str] = Field(default_factory=list)
    chosen: list[str] = Field(default_factory=list)


class FigurePreset(BaseModel):
    model_config = ConfigDict(extra="ignore")

    figure: int = Field(ge=1, le=8)
    description: str
    curves: list[CurveSpec]
    # numerical curves compared against the named analytic reference
    reference: Optional[str] = None


def _curve(name: str, stated: dict[str, Any], chosen: dict[str, Any]) -> CurveSpec:
    config = RunConfig.model_validate({**chosen, **stated})
    return CurveSpec(name=name, config=config, stated=sorted(stated), chosen=sorted(chosen))


def _analytic_time(tau_max: float = 12 * math.pi, tau_step: float = 0.01) -> dict[str, Any]:
    return {"tau_max": tau_max, "tau_step": tau_step}


def _numerical_time(engine: str, tau_max: float = 12 * math.pi) -> dict[str, Any]:
    return {
        "engine": engine,
        "hamiltonian_mode": "full_lab",
        "tau_max": tau_max,
        "tau_step": 0.05,
        "n_max": 64,
    }


def _figure_1() -> FigurePreset:
    curves = [
        _curve(
            f"g{g:g}",
            {"engine": "analytic", "delta_over_omega": 1.0, "kappa_over_omega": 0.01},
            {"g_over_omega": g, **_analytic_time()},
        )
        for g in (0.5, 1.0, 2.0, 3.0)
    ]
    return FigurePreset(figure=1, description="coupling sweep of P0(+), P0(-), <N> and purity", curves=curves)


def _figure_2() -> FigurePreset:
    stated = {"engine": "analytic", "g_over_omega": 2.0, "delta_over_omega": 1.0, "kappa_over_omega": 0.01}
    return FigurePreset(
        figure=2,
        description="parity-chain probabilities and subsystem observables",
        curves=[_curve("analytic", stated, _analytic_time())],
    )


def _figure_3() -> FigurePreset:
    stated = {
        "engine": "analytic",
        "g_over_omega": 2.0,
        "delta_over_omega": 1.0,
        "kappa_over_omega": 0.01,
        "tau_max": 12 * math.pi,
        "tau_step": math.pi,
        "n_report": 20,
    }
    return FigurePreset(
        figure=3,
        description="chain statistics sampled at tau = pi l, l = 0..12",
        curves=[_curve("snapshots", stated, {})],
    )


def _figure_4() -> FigurePreset:
    stated = {"engine": "analytic", "g_over_omega": 2.0, "delta_over_omega": 1.0, "kappa_over_omega": 0.2}
    return FigurePreset(
        figure=4,
        description="approach to the steady state",
        curves=[_curve("analytic", stated, _analytic_time(tau_max=60.0, tau_step=0.02))],
    )


def _figure_5() -> FigurePreset:
    analytic = _curve(
        "analytic",
        {"engine": "analytic", "g_over_omega": 2.0, "delta_over_omega": 1.0, "kappa_over_omega": 0.01},
        _analytic_time(tau_max=12.0, tau_step=0.05),
    )
    mcwf = _curve(
        "mcwf_delta0.8",
        {"g_over_omega": 2.0, "delta_over_omega": 0.8, "kappa_over_omega": 0.01},
        {**_numerical_time("mcwf", tau_max=12.0), "n_traj": 1000, "master_seed": 12345},
    )
    return FigurePreset(
        figure=5,
        description="analytic <N> against the jump unraveling at Delta = 0.8",
        curves=[analytic, mcwf],
        reference="analytic",
    )


def _detuned(engine: str, kappa: float) -> list[CurveSpec]:
    curves = []
    for delta in DETUNINGS:
        stated: dict[str, Any] = {"g_over_omega": 2.0, "kappa_over_omega": kappa}
        chosen = _numerical_time(engine)
        if engine == "mesolve":
            chosen["rtol"] = 1e-8
        name = f"{engine}_delta{delta:g}" if kappa == 0.01 else f"{engine}_kappa{kappa:g}_delta{delta:g}"
        curves.append(_curve(name, {**stated, "delta_over_omega": delta}, chosen))
    return curves


def _figure_6() -> FigurePreset:
    curves = []
    for curve in _detuned("mesolve", 0.01):
        # the per-panel detunings are not printed in the caption
        stated = [key for key in curve.stated if key != "delta_over_omega"]
        curves.append(curve.model_copy(update={"stated": stated, "chosen": sorted(curve.chosen + ["delta_over_omega"])}))
    return FigurePreset(figure=6, description="P0(+) and P0(-) against detuning", curves=curves)


def _figure_7() -> FigurePreset:
    analytic = _curve(
        "analytic",
        {"engine": "analytic", "g_over_omega": 2.0, "delta_over_omega": 1.0, "kappa_over_omega": 0.01},
        _analytic_time(tau_step=0.05),
    )
    return FigurePreset(
        figure=7,
        description="effect of detuning on <N>",
        curves=[analytic, *_detuned("mesolve", 0.01)],
        reference="analytic",
    )


def _figure_8() -> FigurePreset:
    curves = []
    for kappa in (0.3, 0.5, 1.0):
        curves.append(
            _curve(
                f"analytic_kappa{kappa:g}",
                {"engine": "analytic", "g_over_omega": 2.0, "delta_over_omega": 1.0, "kappa_over_omega": kappa},
                _analytic_time(tau_max=30.0, tau_step=0.05),
            )
        )
        for curve in _detuned("mesolve", kappa):
            config = curve.config.model_copy(update={"tau_max": 30.0})
            curves.append(curve.model_copy(update={"config": config}))
    return FigurePreset(figure=8, description="<N> for several decay rates and detunings", curves=curves)


_PRESETS = {
    1: _figure_1,
    2: _figure_2,
    3: _figure_3,
    4: _figure_4,
    5: _figure_5,
    6: _figure_6,
    7: _figure_7,
    8: _figure_8,
}


def preset(figure_id: int) -> FigurePreset:
    builder = _PRESETS.get(figure_id)
    if builder is None:
        raise ConfigError(f"Unknown figure preset: {figure_id} (expected 1..8)")
    return builder()


def _apply_overrides(curve: CurveSpec, overrides: dict[str, Any]) -> tuple[RunConfig, list[str]]:
    applicable = {key: value for key, value in overrides.items() if value is not None and key in RunConfig.model_fields}
    # detuning, coupling and decay define the curve itself
    applicable = {
        key: value
        for key, value in applicable.items()
        if key not in {"engine", "g_over_omega", "kappa_over_omega", "delta_over_omega", "omega0_over_omega", "output"}
    }
    if curve.config.engine == "analytic":
        applicable.pop("n_max", None)
        applicable.pop("n_traj", None)
    if not applicable:
        return curve.config, []
    overridden = sorted(applicable)
    for key in overridden:
        if key in curve.stated:
            logger.warning("figures.override.stated key=%s curve=%s", key, curve.name)
    return run_config_from(curve.config.model_dump(), applicable), overridden


def _write_summary(preset_: FigurePreset, paths: dict[str, Path], directory: Path) -> Optional[Path]:
    if preset_.reference is None:
        return None
    reference = paths[preset_.reference]
    rows = []
    for curve in preset_.curves:
        if curve.name == preset_.reference:
            continue
        row: dict[str, Any] = {
            "curve": curve.name,
            "delta_over_omega": curve.config.delta,
            "kappa_over_omega": curve.config.kappa_over_omega,
        }
        if preset_.figure == 5:
            report = compare(reference, paths[curve.name], metric="max_rel", tau_limit=_FIG5_TAU_LIMIT, interpolate=True)
            row["max_rel_tau_le_9"] = report.value
        else:
            report = compare(reference, paths[curve.name], metric="rel_at_tau", tau_star=DEFAULT_TAU_STAR, interpolate=True)
            row["rel_at_tau_8.5"] = report.value
        rows.append(row)
    target = directory / "relative_differences.csv"
    pd.DataFrame(rows).to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("figures.summary.done path=%s rows=%s", target, len(rows))
    return target


def figure(
    figure_id: int,
    output_dir: Union[str, Path],
    runner: Optional[ExperimentRunner] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> Path:
    """Run every curve of a preset into ``output_dir/fig<id>/`` and return that directory."""
    preset_ = preset(figure_id)
    runner = runner or ExperimentRunner()
    directory = Path(output_dir) / f"fig{figure_id}"
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "preset.json").write_text(preset_.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("figures.run.start figure=%s curves=%s dir=%s", figure_id, len(preset_.curves), directory)

    paths: dict[str, Path] = {}
    for curve in preset_.curves:
        config, overridden = _apply_overrides(curve, overrides or {})
        paths[curve.name] = runner.run_to_file(
            config,
            directory / f"{curve.name}.csv",
            chosen=curve.chosen,
            stated=curve.stated,
            overridden=overridden,
        )
    _write_summary(preset_, paths, directory)
    logger.info("figures.run.done figure=%s dir=%s", figure_id, directory)
    return directory
