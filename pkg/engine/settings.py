from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class EngineSettings:
    n_max: int = 64
    mesolve_dt: float = 1e-3
    mcwf_dt: float = 1e-3
    workers: int = 1
    output_dir: str = "output"
    log_level: str = "INFO"


def load_settings() -> EngineSettings:
    return EngineSettings(
        n_max=int(os.getenv("DSC_N_MAX", "64")),
        mesolve_dt=float(os.getenv("DSC_MESOLVE_DT", "1e-3")),
        mcwf_dt=float(os.getenv("DSC_MCWF_DT", "1e-3")),
        workers=max(1, int(os.getenv("DSC_WORKERS", "1"))),
        output_dir=os.getenv("DSC_OUTPUT_DIR", "output"),
        log_level=os.getenv("DSC_LOG_LEVEL", "INFO").upper(),
    )
