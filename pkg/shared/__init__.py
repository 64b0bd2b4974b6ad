from .contracts import FockSpace, ModelParams, RunConfig, RunMetadata, run_config_from

__version__ = "0.1.0"
CSV_SCHEMA_VERSION = "1"

__all__ = [
    "CSV_SCHEMA_VERSION",
    "FockSpace",
    "ModelParams",
    "RunConfig",
    "RunMetadata",
    "__version__",
    "run_config_from",
]
