from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from shared.errors import ConfigError

from .csv_io import read_run

logger = logging.getLogger(__name__)

Metric = Literal["max_abs", "rel_at_tau", "max_rel"]

DEFAULT_TAU_STAR = 8.5
# max_rel skips points where |a| is below this floor (collapse zeros of <N>)
DEFAULT_REL_FLOOR = 0.5
_GRID_TOLERANCE = 1e-9


class CompareReport(BaseModel):
    model_config = ConfigDict(extra="ignore")

    file_a: str
    file_b: str
    column: str
    metric: Metric
    value: float
    tau_star: Optional[float] = None
    tau_limit: Optional[float] = None
    floor: Optional[float] = None
    interpolated: bool = False
    points: int


def _aligned(a: pd.DataFrame, b: pd.DataFrame, column: str, interpolate: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    for name, frame in (("a", a), ("b", b)):
        if "tau" not in frame.columns or column not in frame.columns:
            raise ConfigError(f"file {name} has no '{column}' column")
    tau_a = a["tau"].to_numpy(dtype=float)
    tau_b = b["tau"].to_numpy(dtype=float)
    values_a = a[column].to_numpy(dtype=float)
    values_b = b[column].to_numpy(dtype=float)
    if tau_a.shape == tau_b.shape and np.allclose(tau_a, tau_b, rtol=0.0, atol=_GRID_TOLERANCE):
        return tau_a, values_a, values_b
    if not interpolate:
        raise ConfigError("tau grids differ; pass --interpolate to resample b onto a")
    inside = (tau_a >= tau_b[0] - _GRID_TOLERANCE) & (tau_a <= tau_b[-1] + _GRID_TOLERANCE)
    return tau_a[inside], values_a[inside], np.interp(tau_a[inside], tau_b, values_b)


def max_abs(values_a: np.ndarray, values_b: np.ndarray) -> float:
    return float(np.max(np.abs(values_a - values_b))) if values_a.size else 0.0


def rel_at_tau(tau: np.ndarray, values_a: np.ndarray, values_b: np.ndarray, tau_star: float = DEFAULT_TAU_STAR) -> float:
    """|a(tau*) - b(tau*)| / |a(tau*)|, both series linearly interpolated at tau*."""
    if tau.size == 0 or not tau[0] <= tau_star <= tau[-1]:
        raise ConfigError(f"tau*={tau_star} lies outside the compared grid")
    a_star = float(np.interp(tau_star, tau, values_a))
    b_star = float(np.interp(tau_star, tau, values_b))
    if a_star == 0.0:
        return 0.0 if b_star == 0.0 else float("inf")
    return abs(a_star - b_star) / abs(a_star)


def max_rel(
    tau: np.ndarray,
    values_a: np.ndarray,
    values_b: np.ndarray,
    tau_limit: Optional[float] = None,
    floor: float = DEFAULT_REL_FLOOR,
) -> float:
    keep = np.abs(values_a) > floor
    if tau_limit is not None:
        keep &= tau <= tau_limit + _GRID_TOLERANCE
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(values_a[keep] - values_b[keep]) / np.abs(values_a[keep])))


def compare_frames(
    a: pd.DataFrame,
    b: pd.DataFrame,
    column: str = "mean_photon",
    metric: Metric = "max_abs",
    tau_star: float = DEFAULT_TAU_STAR,
    tau_limit: Optional[float] = None,
    floor: float = DEFAULT_REL_FLOOR,
    interpolate: bool = False,
) -> tuple[float, int]:
    tau, values_a, values_b = _aligned(a, b, column, interpolate)
    if metric == "max_abs":
        return max_abs(values_a, values_b), int(tau.size)
    if metric == "rel_at_tau":
        return rel_at_tau(tau, values_a, values_b, tau_star), int(tau.size)
    if metric == "max_rel":
        return max_rel(tau, values_a, values_b, tau_limit, floor), int(tau.size)
    raise ConfigError(f"Unsupported metric: {metric}")


def compare(
    csv_a: Union[str, Path],
    csv_b: Union[str, Path],
    column: str = "mean_photon",
    metric: Metric = "max_abs",
    tau_star: float = DEFAULT_TAU_STAR,
    tau_limit: Optional[float] = None,
    floor: float = DEFAULT_REL_FLOOR,
    interpolate: bool = False,
) -> CompareReport:
    value, points = compare_frames(
        read_run(csv_a),
        read_run(csv_b),
        column=column,
        metric=metric,
        tau_star=tau_star,
        tau_limit=tau_limit,
        floor=floor,
        interpolate=interpolate,
    )
    logger.info("compare.done column=%s metric=%s value=%.6g points=%s", column, metric, value, points)
    return CompareReport(
        file_a=str(csv_a),
        file_b=str(csv_b),
        column=column,
        metric=metric,
        value=value,
        tau_star=tau_star if metric == "rel_at_tau" else None,
        tau_limit=tau_limit if metric == "max_rel" else None,
        floor=floor if metric == "max_rel" else None,
        interpolated=interpolate,
        points=points,
    )
