from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from shared.contracts import RunMetadata

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
BASE_COLUMNS = ("tau", "mean_photon", "p_g", "p_e", "purity")
STDERR_PREFIX = "stderr_"


def column_order(n_report: int, with_stderr: bool = False) -> list[str]:
    chains = [f"chain_plus_{n}" for n in range(n_report + 1)] + [f"chain_minus_{n}" for n in range(n_report + 1)]
    columns = list(BASE_COLUMNS) + chains
    if with_stderr:
        columns += [f"{STDERR_PREFIX}{name}" for name in ["mean_photon", "p_g", "p_e", *chains]]
    return columns


def sidecar_path(csv_path: Union[str, Path]) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_run(
    path: Union[str, Path],
    columns: dict[str, np.ndarray],
    metadata: RunMetadata,
) -> Path:
    """Write the CSV in metadata.columns order plus the JSON sidecar with the same basename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    missing = [name for name in metadata.columns if name not in columns]
    if missing:
        raise ValueError(f"missing CSV columns: {missing}")
    frame = pd.DataFrame({name: np.asarray(columns[name], dtype=float) for name in metadata.columns})
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    sidecar_path(target).write_text(metadata.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("csv_io.write.done path=%s rows=%s columns=%s", target, len(frame), len(frame.columns))
    return target


def read_run(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(Path(path), float_precision="round_trip")


def read_metadata(csv_path: Union[str, Path]) -> RunMetadata:
    return RunMetadata.model_validate_json(sidecar_path(csv_path).read_text(encoding="utf-8"))
