"""Lindblad master-equation integration on the truncated space.

    d rho / dt = -i [H, rho] + kappa/2 (2 a rho a^dag - a^dag a rho - rho a^dag a)

``full_lab`` integrates the Rabi Hamiltonian in the lab frame; ``slow_qubit``
integrates Delta a^dag a + g sigma_x (a + a^dag). Run in the sigma_x basis the
slow-qubit generator is the four-block sector system with the frame phases set
to one, so no separate sector integrator exists.

The interaction-picture transformation U(t) = exp(i H0 t) is diagonal in the
|s, n> basis, so populations, photon statistics, chain probabilities and purity
are identical in both frames; the lab frame is integrated and
``to_interaction_picture`` is provided for comparisons.

The dissipator is the standard bare-mode one even in deep strong coupling,
where a dressed-basis treatment would differ microscopically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from shared.contracts import FockSpace, HamiltonianMode, ModelParams
from shared.errors import NonConvergenceError, TruncationError

from .model import Operator, annihilation, interaction_frame, photon_numbers, rabi_hamiltonian, slow_qubit_hamiltonian
from .stepper import StepControl, integrate

logger = logging.getLogger(__name__)

DensityMatrix = Operator

TRACE_TOLERANCE = 1e-8
HERMITICITY_TOLERANCE = 1e-10
TRUNCATION_TOLERANCE = 1e-8
TRUNCATION_LEVELS = 4
PSD_SPOT_CHECKS = 8
_GROSS_TRACE_DRIFT = 1e-6


@dataclass(frozen=True)
class EvolutionSpec:
    hamiltonian_mode: HamiltonianMode
    params: ModelParams
    space: FockSpace
    t_grid: NDArray[np.float64]
    initial: DensityMatrix
    step_control: StepControl = field(default_factory=StepControl)

    def __post_init__(self) -> None:
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
            raise ValueError("t_grid must be one-dimensional and start at 0")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        check_density_matrix(self.initial, self.space)


@dataclass
class EvolutionMonitor:
    max_trace_drift: float = 0.0
    max_hermiticity_error: float = 0.0
    max_truncation_population: float = 0.0
    min_eigenvalue: float = 1.0
    truncation_flagged: bool = False
    samples: int = 0

    def as_dict(self) -> dict:
        return {
            "max_trace_drift": self.max_trace_drift,
            "max_hermiticity_error": self.max_hermiticity_error,
            "max_truncation_population": self.max_truncation_population,
            "min_eigenvalue": self.min_eigenvalue,
            "truncation_flagged": self.truncation_flagged,
            "samples": self.samples,
        }


@dataclass(frozen=True)
class SteadyResult:
    rho: DensityMatrix
    converged_at: float
    residual: float


def check_density_matrix(rho: DensityMatrix, space: FockSpace) -> None:
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match dim={space.dim}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOLERANCE:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOLERANCE:
        raise ValueError("density matrix trace differs from one")


def build_hamiltonian(mode: HamiltonianMode, params: ModelParams, space: FockSpace) -> Operator:
    if mode == "full_lab":
        return rabi_hamiltonian(params, space)
    if mode == "slow_qubit":
        return slow_qubit_hamiltonian(params, space)
    raise ValueError(f"unknown hamiltonian mode: {mode}")


def _jump_operator_for(dim: int) -> Operator:
    if dim % 2:
        raise ValueError(f"dimension {dim} is not a qubit x mode dimension")
    return annihilation(FockSpace(n_max=dim // 2 - 1))


def lindblad_rhs(rho: DensityMatrix, H: Operator, kappa: float, a: Optional[Operator] = None) -> DensityMatrix:
    """Dense reference form of the master-equation right-hand side."""
    if rho.shape != H.shape or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs H {H.shape}")
    a = _jump_operator_for(rho.shape[0]) if a is None else a
    if a.shape != rho.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs a {a.shape}")
    a_dag = a.conj().T
    n_op = a_dag @ a
    out = -1j * (H @ rho - rho @ H)
    if kappa:
        out = out + 0.5 * kappa * (2.0 * a @ rho @ a_dag - n_op @ rho - rho @ n_op)
    return out


class LindbladGenerator:
    """Right-hand side with H and a held as CSR matrices; a^dag a acts as a diagonal."""

    def __init__(self, H: Operator, kappa: float, space: FockSpace) -> None:
        if H.shape != (space.dim, space.dim):
            raise ValueError(f"dimension mismatch: H {H.shape} vs dim={space.dim}")
        self.kappa = float(kappa)
        self._h = sparse.csr_matrix(H)
        self._h_t = sparse.csr_matrix(H.T)
        self._a = sparse.csr_matrix(annihilation(space))
        self._n = photon_numbers(space).astype(float)

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        out = -1j * (self._h @ rho - (self._h_t @ rho.T).T)
        if self.kappa:
            a_rho = self._a @ rho
            jump = (self._a @ a_rho.conj().T).conj().T
            decay = self._n[:, None] * rho + rho * self._n[None, :]
            out = out + self.kappa * jump - 0.5 * self.kappa * decay
        return np.asarray(out)


def truncation_population(rho: DensityMatrix, space: FockSpace, levels: int = TRUNCATION_LEVELS) -> float:
    diag = np.real(np.diag(rho))
    top = photon_numbers(space) > space.n_max - levels
    return float(np.sum(diag[top]))


def to_interaction_picture(rho: DensityMatrix, params: ModelParams, space: FockSpace, t: float) -> DensityMatrix:
    u = interaction_frame(params, space, t)
    return u @ rho @ u.conj().T


def _spot_indices(count: int) -> set[int]:
    return set(np.linspace(0, count - 1, min(PSD_SPOT_CHECKS, count)).astype(int).tolist())


def evolve(
    spec: EvolutionSpec,
    monitor: Optional[EvolutionMonitor] = None,
    strict: bool = True,
) -> Iterator[tuple[float, DensityMatrix]]:
    """Yield (t, rho) at every grid time.

    Trace drift, Hermiticity and top-level Fock population are checked at every
    grid time; the smallest eigenvalue only at a few spread-out samples. With
    ``strict`` a truncation violation raises TruncationError, otherwise it is
    flagged on the monitor.
    """
    monitor = monitor if monitor is not None else EvolutionMonitor()
    H = build_hamiltonian(spec.hamiltonian_mode, spec.params, spec.space)
    generator = LindbladGenerator(H, spec.params.kappa, spec.space)
    spot = _spot_indices(len(spec.t_grid))
    logger.info(
        "mesolve.evolve.start mode=%s dim=%s points=%s dt=%s rtol=%s",
        spec.hamiltonian_mode,
        spec.space.dim,
        len(spec.t_grid),
        spec.step_control.dt,
        spec.step_control.rtol,
    )
    for k, (t, rho) in enumerate(integrate(generator, spec.initial, spec.t_grid, spec.step_control)):
        if not np.all(np.isfinite(rho)):
            raise NonConvergenceError(f"non-finite density matrix at t={t}")
        drift = abs(np.trace(rho).real - 1.0)
        monitor.max_trace_drift = max(monitor.max_trace_drift, drift)
        monitor.max_hermiticity_error = max(monitor.max_hermiticity_error, float(np.max(np.abs(rho - rho.conj().T))))
        top = truncation_population(rho, spec.space)
        monitor.max_truncation_population = max(monitor.max_truncation_population, top)
        monitor.samples += 1
        if k in spot:
            hermitian = 0.5 * (rho + rho.conj().T)
            monitor.min_eigenvalue = min(monitor.min_eigenvalue, float(np.linalg.eigvalsh(hermitian)[0]))
        if drift > _GROSS_TRACE_DRIFT:
            raise NonConvergenceError(f"trace drift {drift:.2e} at t={t}; reduce the step size")
        if top > TRUNCATION_TOLERANCE and not monitor.truncation_flagged:
            monitor.truncation_flagged = True
            logger.warning("mesolve.evolve.truncation t=%s top_population=%.3e n_max=%s", t, top, spec.space.n_max)
            if strict:
                raise TruncationError(
                    f"population {top:.2e} in the top {TRUNCATION_LEVELS} Fock levels at t={t}; increase n_max"
                )
        yield t, rho
    logger.info(
        "mesolve.evolve.done samples=%s trace_drift=%.2e truncation=%.2e",
        monitor.samples,
        monitor.max_trace_drift,
        monitor.max_truncation_population,
    )


def steady(
    spec: EvolutionSpec,
    epsilon: float = 1e-7,
    max_time: float = 2000.0,
    check_interval: float = 1.0,
) -> SteadyResult:
    """Integrate from spec.initial until max |d rho / dt| < epsilon."""
    if spec.params.kappa <= 0:
        raise ValueError("steady state requires kappa > 0")
    H = build_hamiltonian(spec.hamiltonian_mode, spec.params, spec.space)
    generator = LindbladGenerator(H, spec.params.kappa, spec.space)
    rho = np.array(spec.initial, dtype=complex, copy=True)
    t = 0.0
    chunk = np.array([0.0, check_interval])
    residual = float(np.max(np.abs(generator(rho))))
    logger.info("mesolve.steady.start mode=%s epsilon=%s max_time=%s", spec.hamiltonian_mode, epsilon, max_time)
    while residual >= epsilon:
        if t >= max_time:
            raise NonConvergenceError(f"no steady state within t={max_time}: residual {residual:.2e}")
        for _, state in integrate(generator, rho, chunk, spec.step_control):
            rho = state
        t += check_interval
        if truncation_population(rho, spec.space) > TRUNCATION_TOLERANCE:
            raise TruncationError(f"steady-state search leaves the truncated space at t={t}")
        residual = float(np.max(np.abs(generator(rho))))
    logger.info("mesolve.steady.done converged_at=%s residual=%.2e", t, residual)
    return SteadyResult(rho=rho, converged_at=t, residual=residual)
