from __future__ import annotations

import json
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, model_validator

from .errors import ConfigError

Engine = Literal["analytic", "mesolve", "mcwf"]
HamiltonianMode = Literal["full_lab", "slow_qubit"]
QubitLevel = Literal["ground", "excited"]


class ModelParams(BaseModel):
    """Physical parameters in units of the mode frequency (hbar = 1)."""

    model_config = ConfigDict(frozen=True)

    omega: float = Field(default=1.0, gt=0.0)
    omega0: float = Field(default=0.0, ge=0.0)
    g: float = Field(ge=0.0)
    kappa: float = Field(default=0.0, ge=0.0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def delta(self) -> float:
        return self.omega - self.omega0

    @model_validator(mode="after")
    def _check_qubit_frequency(self) -> "ModelParams":
        if self.omega0 > self.omega:
            raise ValueError(f"omega0={self.omega0} must not exceed omega={self.omega}")
        return self

    @classmethod
    def from_ratios(
        cls,
        g: float,
        kappa: float,
        delta: Optional[float] = None,
        omega0: Optional[float] = None,
    ) -> "ModelParams":
        if (delta is None) == (omega0 is None):
            raise ConfigError("exactly one of delta or omega0 must be given")
        if omega0 is None:
            omega0 = 1.0 - float(delta)
        return cls(omega=1.0, omega0=omega0, g=g, kappa=kappa)


class FockSpace(BaseModel):
    """Truncated qubit x mode space; basis index = 2 n + s, s = 0 for |g>, 1 for |e>."""

    model_config = ConfigDict(frozen=True)

    n_max: int = Field(ge=1)

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, s: int, n: int) -> int:
        if s not in (0, 1) or not 0 <= n <= self.n_max:
            raise ValueError(f"basis label out of range: s={s} n={n} n_max={self.n_max}")
        return 2 * n + s

    def label(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.dim:
            raise ValueError(f"basis index out of range: {index} (dim={self.dim})")
        n, s = divmod(index, 2)
        return s, n


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="ignore")

    engine: Engine = "analytic"
    hamiltonian_mode: HamiltonianMode = "full_lab"
    g_over_omega: float = Field(ge=0.0)
    kappa_over_omega: float = Field(default=0.0, ge=0.0)
    delta_over_omega: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    omega0_over_omega: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    tau_max: float = Field(gt=0.0)
    tau_step: float = Field(gt=0.0)
    n_max: Optional[int] = Field(default=None, ge=1)
    n_traj: int = Field(default=1000, ge=1)
    master_seed: int = Field(default=12345, ge=0)
    n_report: int = Field(default=20, ge=0)
    initial_qubit: QubitLevel = "ground"
    initial_photons: int = Field(default=0, ge=0)
    dt: Optional[float] = Field(default=None, gt=0.0)
    rtol: Optional[float] = Field(default=None, gt=0.0)
    workers: Optional[int] = Field(default=None, ge=1)
    track_purity: bool = False
    output: Optional[str] = None

    @model_validator(mode="after")
    def _check_detuning(self) -> "RunConfig":
        if (self.delta_over_omega is None) == (self.omega0_over_omega is None):
            raise ValueError("exactly one of delta_over_omega / omega0_over_omega must be provided")
        if self.tau_step > self.tau_max:
            raise ValueError("tau_step must not exceed tau_max")
        return self

    @property
    def delta(self) -> float:
        if self.delta_over_omega is not None:
            return self.delta_over_omega
        return 1.0 - float(self.omega0_over_omega)

    def to_params(self) -> ModelParams:
        return ModelParams.from_ratios(
            g=self.g_over_omega,
            kappa=self.kappa_over_omega,
            delta=self.delta_over_omega,
            omega0=self.omega0_over_omega,
        )


class RunMetadata(BaseModel):
    model_config = ConfigDict(extra="ignore")

    engine: Engine
    config: dict[str, Any]
    parameters: dict[str, float]
    master_seed: Optional[int] = None
    code_version: str
    schema_version: str
    columns: list[str]
    truncation: dict[str, Any] = Field(default_factory=dict)
    validity_horizon: Optional[float] = None
    stderr_defined: Optional[bool] = None
    stated: list[str] = Field(default_factory=list)
    chosen: list[str] = Field(default_factory=list)
    overridden: list[str] = Field(default_factory=list)
    extras: dict[str, Any] = Field(default_factory=dict)


def coerce_arguments(arguments: Any) -> dict:
    if arguments is None:
        return {}
    if isinstance(arguments, dict):
        return arguments
    if isinstance(arguments, str):
        try:
            parsed = json.loads(arguments)
            return parsed if isinstance(parsed, dict) else {}
        except json.JSONDecodeError:
            return {}
    return {}


def run_config_from(arguments: Any, overrides: Optional[dict] = None) -> RunConfig:
    merged = {**coerce_arguments(arguments)}
    if "schema_version" in merged and isinstance(merged.get("config"), dict):
        merged = {**merged["config"]}
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    # a flag for one detuning form replaces the other one from the file
    if overrides:
        if overrides.get("delta_over_omega") is not None:
            merged.pop("omega0_over_omega", None)
        elif overrides.get("omega0_over_omega") is not None:
            merged.pop("delta_over_omega", None)
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
