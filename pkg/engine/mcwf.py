"""Monte Carlo wavefunction (quantum-jump) unraveling of the master equation.

Between jumps a trajectory follows i d psi / dt = H_eff psi with
H_eff = H - i kappa/2 a^dag a. A jump a psi / |a psi| happens when the squared
norm falls to a uniform threshold r drawn after the previous jump; the jump time
is refined by bisection inside the RK4 step.

The RK4 step of this linear equation is the matrix polynomial
1 + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24 with M = -i H_eff, applied as a
precomputed matrix. Without jumps the norm is non-increasing, so a grid interval
whose end norm stays above r is advanced with a single matrix power.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from shared.contracts import FockSpace, HamiltonianMode, ModelParams
from shared.errors import StepSizeError, TruncationError

from .mesolve import TRUNCATION_LEVELS, TRUNCATION_TOLERANCE, build_hamiltonian
from .model import Operator, StateVector, annihilation, number_operator, parity_diagonal
from .rng import open_unit, trajectory_generator
from .stepper import rk4_apply, rk4_propagator, substeps

logger = logging.getLogger(__name__)

MAX_NORM_DROP = 0.1
JUMP_TIME_TOLERANCE = 1e-10
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class TrajectorySpec:
    hamiltonian_mode: HamiltonianMode
    params: ModelParams
    space: FockSpace
    t_grid: NDArray[np.float64]
    dt: float = 1e-3
    n_report: int = 20
    instrument: bool = False
    track_purity: bool = False

    def __post_init__(self) -> None:
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("t_grid must start at 0 and be strictly increasing")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class JumpRecord:
    t: float
    parity_before: float
    parity_after: float


@dataclass
class TrajectoryResult:
    t_grid: NDArray[np.float64]
    states: NDArray[np.complex128]
    jump_times: list[float] = field(default_factory=list)
    jumps: list[JumpRecord] = field(default_factory=list)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def observables(self, space: FockSpace, n_report: int) -> dict[str, NDArray[np.float64]]:
        return trajectory_observables(self.states, space, n_report)


@dataclass
class EnsembleResult:
    t_grid: NDArray[np.float64]
    mean: dict[str, NDArray[np.float64]]
    stderr: dict[str, NDArray[np.float64]]
    n_traj: int
    master_seed: int
    jump_count_mean: float
    jump_count_stderr: float
    first_jump_mean: Optional[float]
    first_jump_stderr: Optional[float]
    trajectories_with_jumps: int
    purity: Optional[NDArray[np.float64]] = None
    max_truncation_population: float = 0.0
    truncation_flagged: bool = False

    @property
    def stderr_defined(self) -> bool:
        return self.n_traj >= 2

    def truncation(self) -> dict:
        return {
            "max_truncation_population": self.max_truncation_population,
            "truncation_flagged": self.truncation_flagged,
            "samples": self.n_traj * len(self.t_grid),
        }


def effective_hamiltonian(H: Operator, kappa: float, a: Optional[Operator] = None) -> Operator:
    if a is None:
        n_op = number_operator(FockSpace(n_max=H.shape[0] // 2 - 1))
    else:
        if a.shape != H.shape:
            raise ValueError(f"dimension mismatch: H {H.shape} vs a {a.shape}")
        n_op = a.conj().T @ a
    if n_op.shape != H.shape:
        raise ValueError(f"dimension mismatch: H {H.shape} vs a^dag a {n_op.shape}")
    return H - 0.5j * kappa * n_op


def trajectory_observables(
    states: NDArray[np.complex128],
    space: FockSpace,
    n_report: int,
) -> dict[str, NDArray[np.float64]]:
    """Observables of normalized states stacked as rows (time x dim)."""
    probs = (np.abs(states) ** 2).reshape(states.shape[0], space.n_max + 1, 2)
    parity = parity_diagonal(space).reshape(space.n_max + 1, 2)
    photon_dist = probs.sum(axis=2)
    chain_plus = np.where(parity > 0, probs, 0.0).sum(axis=2)
    chain_minus = np.where(parity < 0, probs, 0.0).sum(axis=2)
    out = {
        "mean_photon": photon_dist @ np.arange(space.n_max + 1, dtype=float),
        "p_g": probs[:, :, 0].sum(axis=1),
        "p_e": probs[:, :, 1].sum(axis=1),
    }
    for n in range(min(n_report, space.n_max) + 1):
        out[f"chain_plus_{n}"] = chain_plus[:, n]
    for n in range(min(n_report, space.n_max) + 1):
        out[f"chain_minus_{n}"] = chain_minus[:, n]
    return out


def truncation_population(states: NDArray[np.complex128], space: FockSpace, levels: int = TRUNCATION_LEVELS) -> float:
    """Largest population in the top Fock levels over a stack of normalized states."""
    probs = (np.abs(states) ** 2).reshape(states.shape[0], space.n_max + 1, 2)
    return float(probs[:, max(0, space.n_max + 1 - levels) :, :].sum(axis=(1, 2)).max())


class TrajectoryKernel:
    """Immutable propagation data shared by every trajectory of an ensemble."""

    def __init__(self, spec: TrajectorySpec) -> None:
        self.spec = spec
        H = build_hamiltonian(spec.hamiltonian_mode, spec.params, spec.space)
        self.kappa = spec.params.kappa
        self.generator = -1j * effective_hamiltonian(H, self.kappa)
        self.jump_operator = annihilation(spec.space)
        self.parity = parity_diagonal(spec.space)
        self._step: dict[float, Operator] = {}
        self._interval: dict[float, tuple[int, float, Operator]] = {}
        for span in sorted({round(float(d), 12) for d in np.diff(np.asarray(spec.t_grid, dtype=float))}):
            count, h = substeps(span, spec.dt)
            step = rk4_propagator(self.generator, h)
            self._step[round(h, 15)] = step
            self._interval[span] = (count, h, np.linalg.matrix_power(step, count))

    def interval(self, span: float) -> tuple[int, float, Operator]:
        return self._interval[round(span, 12)]

    def step(self, h: float) -> Operator:
        return self._step[round(h, 15)]


def _norm2(psi: StateVector) -> float:
    return float(np.vdot(psi, psi).real)


class _Trajectory:
    def __init__(self, kernel: TrajectoryKernel, rng: np.random.Generator) -> None:
        self.kernel = kernel
        self.rng = rng
        self.threshold = open_unit(rng)
        self.jump_times: list[float] = []
        self.jumps: list[JumpRecord] = []

    def _parity(self, psi: StateVector) -> float:
        return float(np.sum(np.abs(psi) ** 2 * self.kernel.parity) / _norm2(psi))

    def _jump(self, psi: StateVector, t: float) -> StateVector:
        image = self.kernel.jump_operator @ psi
        norm = np.sqrt(_norm2(image))
        if norm == 0.0:
            raise StepSizeError(f"jump from a state with no photons at t={t}")
        after = image / norm
        if self.kernel.spec.instrument:
            self.jumps.append(JumpRecord(t=t, parity_before=self._parity(psi), parity_after=self._parity(after)))
        self.jump_times.append(t)
        self.threshold = open_unit(self.rng)
        return after

    def _bisect(self, psi: StateVector, span: float) -> float:
        lo, hi = 0.0, span
        mid = 0.5 * span
        for _ in range(_MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            excess = _norm2(rk4_apply(self.kernel.generator, psi, mid)) - self.threshold
            if abs(excess) < JUMP_TIME_TOLERANCE:
                break
            if excess > 0:
                lo = mid
            else:
                hi = mid
        return mid

    def _advance_step(self, psi: StateVector, h: float, t0: float) -> StateVector:
        elapsed = 0.0
        while True:
            remaining = h - elapsed
            if elapsed == 0.0:
                candidate = self.kernel.step(h) @ psi
            else:
                candidate = rk4_apply(self.kernel.generator, psi, remaining)
            before, after = _norm2(psi), _norm2(candidate)
            if after < (1.0 - MAX_NORM_DROP) * before:
                raise StepSizeError(f"norm dropped from {before:.3f} to {after:.3f} in one step at t={t0}; reduce dt")
            if after > self.threshold:
                return candidate
            s = self._bisect(psi, remaining)
            psi = self._jump(rk4_apply(self.kernel.generator, psi, s), t0 + elapsed + s)
            elapsed += s

    def advance(self, psi: StateVector, t0: float, span: float) -> StateVector:
        count, h, whole = self.kernel.interval(span)
        candidate = whole @ psi
        if self.kernel.kappa == 0.0:
            return candidate
        before, after = _norm2(psi), _norm2(candidate)
        if after > self.threshold:
            if after < (1.0 - MAX_NORM_DROP) ** count * before:
                raise StepSizeError(f"norm drop over [{t0}, {t0 + span}] exceeds the per-step bound; reduce dt")
            return candidate
        for k in range(count):
            psi = self._advance_step(psi, h, t0 + k * h)
        return psi


def _as_generator(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed)))


def run_trajectory(
    psi0: StateVector,
    spec: TrajectorySpec,
    seed: Union[int, np.random.Generator],
    kernel: Optional[TrajectoryKernel] = None,
) -> TrajectoryResult:
    if psi0.shape != (spec.space.dim,):
        raise ValueError(f"psi0 shape {psi0.shape} does not match dim={spec.space.dim}")
    if abs(_norm2(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    kernel = kernel if kernel is not None else TrajectoryKernel(spec)
    walker = _Trajectory(kernel, _as_generator(seed))
    grid = np.asarray(spec.t_grid, dtype=float)
    states = np.empty((grid.size, spec.space.dim), dtype=complex)
    psi = np.array(psi0, dtype=complex, copy=True)
    states[0] = psi
    for k in range(1, grid.size):
        psi = walker.advance(psi, float(grid[k - 1]), float(grid[k] - grid[k - 1]))
        states[k] = psi / np.sqrt(_norm2(psi))
    return TrajectoryResult(t_grid=grid, states=states, jump_times=walker.jump_times, jumps=walker.jumps)


class _RunningMoments:
    """Welford accumulator; fed in trajectory-index order so sums are schedule independent."""

    def __init__(self) -> None:
        self.count = 0
        self.mean: dict[str, NDArray[np.float64]] = {}
        self.m2: dict[str, NDArray[np.float64]] = {}

    def update(self, sample: dict[str, NDArray[np.float64]]) -> None:
        self.count += 1
        for key, value in sample.items():
            value = np.asarray(value, dtype=float)
            if key not in self.mean:
                self.mean[key] = value.copy()
                self.m2[key] = np.zeros_like(value)
                continue
            delta = value - self.mean[key]
            self.mean[key] = self.mean[key] + delta / self.count
            self.m2[key] = self.m2[key] + delta * (value - self.mean[key])

    def stderr(self) -> dict[str, NDArray[np.float64]]:
        if self.count < 2:
            return {key: np.full_like(value, np.nan) for key, value in self.mean.items()}
        return {key: np.sqrt(m2 / (self.count - 1) / self.count) for key, m2 in self.m2.items()}


def _scalar_stats(values: list[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def run_ensemble(
    psi0: StateVector,
    spec: TrajectorySpec,
    n_traj: int,
    master_seed: int,
    workers: int = 1,
    strict: bool = True,
) -> EnsembleResult:
    """Average n_traj trajectories; trajectory i draws from the stream keyed by (master_seed, i).

    With ``strict`` a trajectory whose top Fock levels hold more than the
    truncation tolerance raises TruncationError; otherwise it is only flagged.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    kernel = TrajectoryKernel(spec)
    moments = _RunningMoments()
    jump_counts: list[float] = []
    first_jumps: list[float] = []
    top_population = 0.0
    flagged = False
    rho_sum = (
        np.zeros((len(spec.t_grid), spec.space.dim, spec.space.dim), dtype=complex) if spec.track_purity else None
    )
    logger.info(
        "mcwf.ensemble.start mode=%s n_traj=%s master_seed=%s workers=%s dim=%s",
        spec.hamiltonian_mode,
        n_traj,
        master_seed,
        workers,
        spec.space.dim,
    )

    def one(index: int) -> TrajectoryResult:
        return run_trajectory(psi0, spec, trajectory_generator(master_seed, index), kernel=kernel)

    chunk = max(1, workers * 4)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for start in range(0, n_traj, chunk):
            indices = range(start, min(n_traj, start + chunk))
            for result in pool.map(one, indices):
                top = truncation_population(result.states, spec.space)
                top_population = max(top_population, top)
                if top > TRUNCATION_TOLERANCE and not flagged:
                    flagged = True
                    logger.warning("mcwf.ensemble.truncation top_population=%.3e n_max=%s", top, spec.space.n_max)
                    if strict:
                        raise TruncationError(
                            f"population {top:.2e} in the top {TRUNCATION_LEVELS} Fock levels of a trajectory; increase n_max"
                        )
                moments.update(result.observables(spec.space, spec.n_report))
                jump_counts.append(float(result.n_jumps))
                if result.jump_times:
                    first_jumps.append(result.jump_times[0])
                if rho_sum is not None:
                    rho_sum += np.einsum("ti,tj->tij", result.states, result.states.conj())

    purity = None
    if rho_sum is not None:
        rho_mean = rho_sum / n_traj
        purity = np.einsum("tij,tij->t", rho_mean, rho_mean.conj()).real
    jump_mean, jump_stderr = _scalar_stats(jump_counts)
    first_mean, first_stderr = _scalar_stats(first_jumps)
    logger.info(
        "mcwf.ensemble.done n_traj=%s mean_jumps=%.3f with_jumps=%s",
        n_traj,
        jump_mean,
        len(first_jumps),
    )
    return EnsembleResult(
        t_grid=np.asarray(spec.t_grid, dtype=float),
        mean=moments.mean,
        stderr=moments.stderr(),
        n_traj=n_traj,
        master_seed=master_seed,
        jump_count_mean=float(jump_mean),
        jump_count_stderr=float(jump_stderr) if jump_stderr is not None else float("nan"),
        first_jump_mean=first_mean,
        first_jump_stderr=first_stderr,
        trajectories_with_jumps=len(first_jumps),
        purity=purity,
        max_truncation_population=top_population,
        truncation_flagged=flagged,
    )
