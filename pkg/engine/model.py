"""Operators of the quantum Rabi model on a truncated qubit x Fock space.

Basis ordering is photon-major, qubit-minor: index = 2 n + s with s = 0 for |g>
and s = 1 for |e>. Full operators are therefore ``kron(mode_op, qubit_op)``.
Energies are in units of the mode frequency with hbar = 1.

The commutator [a, a^dagger] equals the identity only for n < n_max; the last
Fock row is a truncation artifact.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import NDArray

from shared.contracts import FockSpace, ModelParams, QubitLevel

Operator = NDArray[np.complex128]
StateVector = NDArray[np.complex128]
Parity = Literal[1, -1]

_QUBIT_SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
_QUBIT_LOWERING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_QUBIT_IDENTITY = np.eye(2, dtype=complex)


def mode_annihilation(n_max: int) -> Operator:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def photon_numbers(space: FockSpace) -> NDArray[np.int64]:
    return np.arange(space.dim) // 2


def qubit_labels(space: FockSpace) -> NDArray[np.int64]:
    return np.arange(space.dim) % 2


def _on_mode(space: FockSpace, mode_op: Operator) -> Operator:
    return np.kron(mode_op, _QUBIT_IDENTITY)


def _on_qubit(space: FockSpace, qubit_op: Operator) -> Operator:
    return np.kron(np.eye(space.n_max + 1, dtype=complex), qubit_op)


def identity(space: FockSpace) -> Operator:
    return np.eye(space.dim, dtype=complex)


def annihilation(space: FockSpace) -> Operator:
    return _on_mode(space, mode_annihilation(space.n_max))


def creation(space: FockSpace) -> Operator:
    return annihilation(space).conj().T


def number_operator(space: FockSpace) -> Operator:
    return np.diag(photon_numbers(space).astype(complex))


def pauli_z(space: FockSpace) -> Operator:
    return _on_qubit(space, _QUBIT_SIGMA_Z)


def lowering(space: FockSpace) -> Operator:
    return _on_qubit(space, _QUBIT_LOWERING)


def raising(space: FockSpace) -> Operator:
    return lowering(space).conj().T


def sigma_x(space: FockSpace) -> Operator:
    return _on_qubit(space, _QUBIT_LOWERING + _QUBIT_LOWERING.conj().T)


def rabi_hamiltonian(params: ModelParams, space: FockSpace) -> Operator:
    """omega a^dag a + omega0/2 sigma_z + g (sigma + sigma^dag)(a + a^dag)."""
    a = annihilation(space)
    quadrature = a + a.conj().T
    return (
        params.omega * number_operator(space)
        + 0.5 * params.omega0 * pauli_z(space)
        + params.g * sigma_x(space) @ quadrature
    )


def free_hamiltonian(params: ModelParams, space: FockSpace) -> Operator:
    """H0 = omega0 (sigma_z / 2 + a^dag a), the part removed by the interaction picture."""
    return params.omega0 * (0.5 * pauli_z(space) + number_operator(space))


def slow_qubit_hamiltonian(params: ModelParams, space: FockSpace) -> Operator:
    """Delta a^dag a + g sigma_x (a + a^dag).

    Equals H - H0, the interaction-picture Hamiltonian with the counter-rotating
    phase exp(2 i omega0 t) set to one. It commutes with sigma_x.
    """
    a = annihilation(space)
    return params.delta * number_operator(space) + params.g * sigma_x(space) @ (a + a.conj().T)


def interaction_frame(params: ModelParams, space: FockSpace, t: float) -> Operator:
    """U(t) = exp(i H0 t); diagonal in the |s, n> basis."""
    return np.diag(np.exp(1j * t * np.real(np.diag(free_hamiltonian(params, space)))))


def parity_diagonal(space: FockSpace) -> NDArray[np.float64]:
    n = photon_numbers(space)
    sz = np.where(qubit_labels(space) == 1, 1.0, -1.0)
    return -sz * np.where(n % 2 == 0, 1.0, -1.0)


def parity_operator(space: FockSpace) -> Operator:
    """Pi = -sigma_z (-1)^(a^dag a); +1 on {|g,2N>, |e,2N+1>}."""
    return np.diag(parity_diagonal(space).astype(complex))


def chain_mask(space: FockSpace, parity: Parity) -> NDArray[np.bool_]:
    return parity_diagonal(space) == float(parity)


def chain_projector(space: FockSpace, parity: Parity) -> Operator:
    return np.diag(chain_mask(space, parity).astype(complex))


def basis_state(space: FockSpace, qubit: QubitLevel, photons: int) -> StateVector:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(0 if qubit == "ground" else 1, photons)] = 1.0
    return psi


def projector(psi: StateVector) -> Operator:
    return np.outer(psi, psi.conj())
