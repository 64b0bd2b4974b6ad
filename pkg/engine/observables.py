from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from shared.contracts import FockSpace

from .model import Operator, mode_annihilation, parity_diagonal

logger = logging.getLogger(__name__)

SectorName = Literal["++", "--", "+-", "-+"]

_SIGMA_X_EIGENVECTORS = {
    "+": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0]) / np.sqrt(2.0),
}


@dataclass(frozen=True)
class ObservableSet:
    mean_photon: float
    p_g: float
    p_e: float
    purity: float
    photon_dist: NDArray[np.float64]
    chain_plus: NDArray[np.float64]
    chain_minus: NDArray[np.float64]
    parity_expectation: float


def _as_density(state: NDArray[np.complex128], space: FockSpace) -> NDArray[np.complex128]:
    if state.ndim == 1:
        if state.shape[0] != space.dim:
            raise ValueError(f"state dimension {state.shape[0]} does not match dim={space.dim}")
        return np.outer(state, state.conj())
    if state.shape != (space.dim, space.dim):
        raise ValueError(f"state shape {state.shape} does not match dim={space.dim}")
    return state


def populations(state: NDArray[np.complex128], space: FockSpace) -> NDArray[np.float64]:
    """Diagonal of the state in the |s, n> basis."""
    if state.ndim == 1:
        if state.shape[0] != space.dim:
            raise ValueError(f"state dimension {state.shape[0]} does not match dim={space.dim}")
        return np.abs(state) ** 2
    if state.shape != (space.dim, space.dim):
        raise ValueError(f"state shape {state.shape} does not match dim={space.dim}")
    return np.real(np.diag(state))


def measure(state: NDArray[np.complex128], space: FockSpace) -> ObservableSet:
    """Observables of a density matrix (2-d) or a pure state vector (1-d)."""
    probs = populations(state, space)
    by_photon = probs.reshape(space.n_max + 1, 2)
    parity = parity_diagonal(space).reshape(space.n_max + 1, 2)
    if state.ndim == 1:
        norm = float(np.sum(probs))
        purity = norm * norm
    else:
        purity = float(np.vdot(state, state).real)
    photon_dist = by_photon.sum(axis=1)
    return ObservableSet(
        mean_photon=float(np.arange(space.n_max + 1) @ photon_dist),
        p_g=float(by_photon[:, 0].sum()),
        p_e=float(by_photon[:, 1].sum()),
        purity=purity,
        photon_dist=photon_dist,
        chain_plus=np.where(parity > 0, by_photon, 0.0).sum(axis=1),
        chain_minus=np.where(parity < 0, by_photon, 0.0).sum(axis=1),
        parity_expectation=float(np.sum(probs * parity_diagonal(space))),
    )


def reduced_mode(state: NDArray[np.complex128], space: FockSpace) -> NDArray[np.complex128]:
    rho = _as_density(state, space).reshape(space.n_max + 1, 2, space.n_max + 1, 2)
    return np.einsum("isjs->ij", rho)


def reduced_qubit(state: NDArray[np.complex128], space: FockSpace) -> NDArray[np.complex128]:
    rho = _as_density(state, space).reshape(space.n_max + 1, 2, space.n_max + 1, 2)
    return np.einsum("nsnt->st", rho)


def sector_block(state: NDArray[np.complex128], space: FockSpace, sector: SectorName) -> NDArray[np.complex128]:
    """Mode operator <a| rho |b> for sigma_x eigenstates a, b in {+, -}."""
    left = _SIGMA_X_EIGENVECTORS[sector[0]]
    right = _SIGMA_X_EIGENVECTORS[sector[1]]
    rho = _as_density(state, space).reshape(space.n_max + 1, 2, space.n_max + 1, 2)
    return np.einsum("s,isjt,t->ij", left, rho, right)


def displacement_operator(alpha: complex, n_max: int) -> NDArray[np.complex128]:
    """D(alpha) = exp(alpha a^dag - alpha* a) on the truncated mode space."""
    a = mode_annihilation(n_max)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def char_function(
    state: NDArray[np.complex128],
    space: FockSpace,
    alpha: complex,
    sector: Optional[SectorName] = None,
) -> complex:
    """Tr[rho D(alpha)] over the mode, optionally restricted to a sigma_x sector block."""
    if abs(alpha) ** 2 > space.n_max / 4:
        logger.warning("observables.char_function.truncation alpha=%s n_max=%s", alpha, space.n_max)
    block = reduced_mode(state, space) if sector is None else sector_block(state, space, sector)
    return complex(np.trace(block @ displacement_operator(alpha, space.n_max)))


def parity_expectation(state: NDArray[np.complex128], space: FockSpace, parity_op: Operator) -> float:
    rho = _as_density(state, space)
    return float(np.trace(rho @ parity_op).real)


def trace_distance(a: NDArray[np.complex128], b: NDArray[np.complex128]) -> float:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
