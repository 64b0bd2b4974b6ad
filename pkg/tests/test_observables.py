from __future__ import annotations

import logging

import numpy as np
import pytest

from engine.analytic import coherent_amplitudes
from engine.model import basis_state, parity_operator, projector
from engine.observables import (
    char_function,
    displacement_operator,
    measure,
    parity_expectation,
    populations,
    reduced_mode,
    reduced_qubit,
    trace_distance,
)
from shared.contracts import FockSpace


def _mixed_state(space: FockSpace) -> np.ndarray:
    rho = 0.5 * projector(basis_state(space, "ground", 0))
    rho += 0.3 * projector(basis_state(space, "excited", 2))
    rho += 0.2 * projector(basis_state(space, "ground", 3))
    return rho


def test_measure_normalization_identities():
    space = FockSpace(n_max=6)
    obs = measure(_mixed_state(space), space)
    assert obs.p_g + obs.p_e == pytest.approx(1.0)
    assert obs.photon_dist.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(obs.chain_plus + obs.chain_minus, obs.photon_dist, atol=1e-15)
    assert obs.mean_photon == pytest.approx(0.3 * 2 + 0.2 * 3)
    assert obs.purity == pytest.approx(0.25 + 0.09 + 0.04)


def test_measure_assigns_chain_membership():
    space = FockSpace(n_max=6)
    obs = measure(_mixed_state(space), space)
    assert obs.chain_plus[0] == pytest.approx(0.5)
    assert obs.chain_minus[2] == pytest.approx(0.3)
    assert obs.chain_minus[3] == pytest.approx(0.2)
    assert obs.parity_expectation == pytest.approx(0.5 - 0.3 - 0.2)


def test_pure_vector_and_density_matrix_agree():
    space = FockSpace(n_max=5)
    psi = (basis_state(space, "ground", 1) + 1j * basis_state(space, "excited", 4)) / np.sqrt(2.0)
    from_vector = measure(psi, space)
    from_matrix = measure(projector(psi), space)
    assert from_vector.mean_photon == pytest.approx(from_matrix.mean_photon)
    assert from_vector.purity == pytest.approx(1.0)
    assert from_matrix.purity == pytest.approx(1.0)
    np.testing.assert_allclose(from_vector.chain_minus, from_matrix.chain_minus, atol=1e-15)


def test_dimension_mismatch_raises():
    space = FockSpace(n_max=3)
    with pytest.raises(ValueError):
        populations(np.zeros(5, dtype=complex), space)
    with pytest.raises(ValueError):
        measure(np.eye(4, dtype=complex), space)
    with pytest.raises(ValueError):
        trace_distance(np.eye(2), np.eye(3))


def test_partial_traces():
    space = FockSpace(n_max=4)
    rho = _mixed_state(space)
    qubit = reduced_qubit(rho, space)
    mode = reduced_mode(rho, space)
    assert qubit[0, 0].real == pytest.approx(0.7)
    assert qubit[1, 1].real == pytest.approx(0.3)
    np.testing.assert_allclose(np.diag(mode).real, [0.5, 0.0, 0.3, 0.2, 0.0], atol=1e-15)


def test_displacement_creates_coherent_state():
    n_max = 40
    alpha = 0.8 - 0.6j
    vacuum = np.zeros(n_max + 1, dtype=complex)
    vacuum[0] = 1.0
    np.testing.assert_allclose(displacement_operator(alpha, n_max) @ vacuum, coherent_amplitudes(alpha, n_max), atol=1e-10)


def test_char_function_of_vacuum_is_gaussian():
    space = FockSpace(n_max=30)
    rho = projector(basis_state(space, "ground", 0))
    alpha = 0.5 + 0.5j
    assert char_function(rho, space, alpha) == pytest.approx(np.exp(-0.5 * abs(alpha) ** 2), abs=1e-10)


def test_char_function_warns_when_displacement_leaves_the_truncation(caplog):
    space = FockSpace(n_max=4)
    rho = projector(basis_state(space, "ground", 0))
    with caplog.at_level(logging.WARNING, logger="engine.observables"):
        char_function(rho, space, 2.0)
    assert "observables.char_function.truncation" in caplog.text


def test_parity_expectation_and_trace_distance():
    space = FockSpace(n_max=3)
    g0 = projector(basis_state(space, "ground", 0))
    e0 = projector(basis_state(space, "excited", 0))
    assert parity_expectation(g0, space, parity_operator(space)) == pytest.approx(1.0)
    assert parity_expectation(e0, space, parity_operator(space)) == pytest.approx(-1.0)
    assert trace_distance(g0, e0) == pytest.approx(1.0)
    assert trace_distance(g0, g0) == pytest.approx(0.0, abs=1e-15)
