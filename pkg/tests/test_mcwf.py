from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from engine.mcwf import TrajectorySpec, effective_hamiltonian, run_ensemble, run_trajectory
from engine.mesolve import EvolutionSpec, build_hamiltonian, evolve
from engine.model import basis_state, number_operator, projector
from engine.observables import measure
from engine.rng import trajectory_generator, trajectory_key
from engine.stepper import StepControl
from shared.contracts import FockSpace, ModelParams
from shared.errors import StepSizeError, TruncationError
from shared.grids import tau_grid


def _spec(params, n_max, tau_max, tau_step, dt=1e-3, mode="full_lab", **kwargs):
    return TrajectorySpec(
        hamiltonian_mode=mode,
        params=params,
        space=FockSpace(n_max=n_max),
        t_grid=tau_grid(tau_max, tau_step),
        dt=dt,
        n_report=min(4, n_max),
        **kwargs,
    )


def test_trajectory_streams_are_keyed_by_seed_and_index():
    assert trajectory_key(1, 2) == (1 << 64) | 2
    first = trajectory_generator(12345, 0).random(4)
    again = trajectory_generator(12345, 0).random(4)
    other = trajectory_generator(12345, 1).random(4)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)
    with pytest.raises(ValueError):
        trajectory_key(-1, 0)


def test_effective_hamiltonian_adds_photon_loss():
    space = FockSpace(n_max=4)
    params = ModelParams.from_ratios(g=1.0, kappa=0.4, delta=0.5)
    H = build_hamiltonian("full_lab", params, space)
    H_eff = effective_hamiltonian(H, params.kappa)
    np.testing.assert_allclose(0.5j * (H_eff - H_eff.conj().T), 0.2 * number_operator(space), atol=1e-14)
    with pytest.raises(ValueError):
        effective_hamiltonian(H, 0.1, np.eye(3, dtype=complex))


def test_unitary_trajectory_matches_exact_propagation():
    params = ModelParams.from_ratios(g=0.5, kappa=0.0, delta=0.7)
    spec = _spec(params, n_max=15, tau_max=2.0, tau_step=0.5)
    psi0 = basis_state(spec.space, "ground", 0)
    result = run_trajectory(psi0, spec, seed=3)
    H = build_hamiltonian("full_lab", params, spec.space)
    for k, t in enumerate(spec.t_grid):
        exact = expm(-1j * H * t) @ psi0
        np.testing.assert_allclose(result.states[k], exact, atol=1e-7)
    assert result.n_jumps == 0


def test_single_photon_jumps_once_with_parity_flip():
    params = ModelParams.from_ratios(g=0.0, kappa=0.5, delta=1.0)
    spec = _spec(params, n_max=4, tau_max=20.0, tau_step=0.5, instrument=True)
    psi0 = basis_state(spec.space, "ground", 1)
    jumped = 0
    for index in range(20):
        result = run_trajectory(psi0, spec, trajectory_generator(7, index))
        assert result.n_jumps <= 1
        for record in result.jumps:
            assert record.parity_before == pytest.approx(-1.0)
            assert record.parity_after == pytest.approx(1.0)
            jumped += 1
    assert jumped > 0


def test_ensemble_reproduces_exponential_decay():
    params = ModelParams.from_ratios(g=0.0, kappa=0.5, delta=1.0)
    spec = _spec(params, n_max=8, tau_max=4.0, tau_step=0.5)
    result = run_ensemble(basis_state(spec.space, "ground", 1), spec, n_traj=400, master_seed=2024)
    expected = np.exp(-0.5 * result.t_grid)
    deviation = np.abs(result.mean["mean_photon"] - expected)
    assert np.all(deviation <= 4 * result.stderr["mean_photon"] + 1e-9)
    assert result.jump_count_mean <= 1.0
    assert result.stderr_defined


def test_ensemble_agrees_with_master_equation():
    # two initial photons and kappa = 1 put jumps before the first grid time after 0,
    # so the ensemble spread is never degenerate there
    params = ModelParams.from_ratios(g=0.5, kappa=1.0, delta=1.0)
    space = FockSpace(n_max=15)
    spec = _spec(params, n_max=15, tau_max=3.0, tau_step=0.5, mode="full_lab")
    psi0 = basis_state(space, "ground", 2)
    ensemble = run_ensemble(psi0, spec, n_traj=300, master_seed=99)
    exact = EvolutionSpec(
        hamiltonian_mode="full_lab",
        params=params,
        space=space,
        t_grid=spec.t_grid,
        initial=projector(psi0),
        step_control=StepControl(dt=1e-3),
    )
    for k, (_, rho) in enumerate(evolve(exact)):
        obs = measure(rho, space)
        for name, value in (("mean_photon", obs.mean_photon), ("p_g", obs.p_g), ("chain_plus_0", obs.chain_plus[0])):
            assert abs(ensemble.mean[name][k] - value) <= 4 * ensemble.stderr[name][k] + 1e-6
        if k > 0:
            assert ensemble.stderr["mean_photon"][k] > 0.0


def test_ensemble_is_independent_of_worker_count():
    params = ModelParams.from_ratios(g=1.0, kappa=0.2, delta=0.8)
    spec = _spec(params, n_max=24, tau_max=2.0, tau_step=0.25)
    psi0 = basis_state(spec.space, "ground", 0)
    serial = run_ensemble(psi0, spec, n_traj=24, master_seed=12345, workers=1)
    threaded = run_ensemble(psi0, spec, n_traj=24, master_seed=12345, workers=4)
    for name in serial.mean:
        np.testing.assert_array_equal(serial.mean[name], threaded.mean[name])
        np.testing.assert_array_equal(serial.stderr[name], threaded.stderr[name])
    assert serial.jump_count_mean == threaded.jump_count_mean


def test_single_trajectory_has_undefined_stderr():
    params = ModelParams.from_ratios(g=1.0, kappa=0.2, delta=1.0)
    spec = _spec(params, n_max=16, tau_max=1.0, tau_step=0.5)
    result = run_ensemble(basis_state(spec.space, "ground", 0), spec, n_traj=1, master_seed=1)
    assert not result.stderr_defined
    assert np.all(np.isnan(result.stderr["mean_photon"]))


def test_purity_tracking_mixes_the_ensemble():
    params = ModelParams.from_ratios(g=0.0, kappa=1.0, delta=1.0)
    spec = _spec(params, n_max=8, tau_max=3.0, tau_step=1.0, track_purity=True)
    result = run_ensemble(basis_state(spec.space, "ground", 1), spec, n_traj=50, master_seed=5)
    assert result.purity is not None
    assert result.purity[0] == pytest.approx(1.0)
    p = result.mean["mean_photon"]
    np.testing.assert_allclose(result.purity, p**2 + (1 - p) ** 2, atol=1e-9)


def test_oversized_step_is_rejected():
    params = ModelParams.from_ratios(g=0.0, kappa=1.0, delta=1.0)
    spec = _spec(params, n_max=8, tau_max=1.0, tau_step=0.1, dt=0.1)
    with pytest.raises(StepSizeError):
        run_trajectory(basis_state(spec.space, "ground", 5), spec, seed=11)


def test_trajectory_rejects_unnormalized_state():
    params = ModelParams.from_ratios(g=1.0, kappa=0.1, delta=1.0)
    spec = _spec(params, n_max=4, tau_max=1.0, tau_step=0.5)
    with pytest.raises(ValueError):
        run_trajectory(2.0 * basis_state(spec.space, "ground", 0), spec, seed=1)


def test_jump_times_fall_inside_the_run():
    params = ModelParams.from_ratios(g=1.0, kappa=0.5, delta=1.0)
    spec = _spec(params, n_max=24, tau_max=math.pi, tau_step=math.pi / 8)
    result = run_ensemble(basis_state(spec.space, "ground", 0), spec, n_traj=16, master_seed=8)
    if result.first_jump_mean is not None:
        assert 0.0 < result.first_jump_mean <= math.pi
    assert result.trajectories_with_jumps <= 16


def test_first_jump_waiting_time_is_exponential():
    params = ModelParams.from_ratios(g=0.0, kappa=0.5, delta=1.0)
    spec = _spec(params, n_max=8, tau_max=40.0, tau_step=1.0)
    result = run_ensemble(basis_state(spec.space, "ground", 1), spec, n_traj=400, master_seed=31)
    assert result.trajectories_with_jumps == 400
    assert abs(result.first_jump_mean - 1.0 / 0.5) <= 3 * result.first_jump_stderr


def test_fock_state_empties_in_exactly_n_jumps():
    params = ModelParams.from_ratios(g=0.0, kappa=1.0, delta=1.0)
    spec = _spec(params, n_max=8, tau_max=30.0, tau_step=1.0, instrument=True)
    psi0 = basis_state(spec.space, "ground", 3)
    vacuum = spec.space.index(0, 0)
    for index in range(20):
        result = run_trajectory(psi0, spec, trajectory_generator(17, index))
        assert result.n_jumps == 3
        assert result.jump_times == sorted(result.jump_times)
        for record in result.jumps:
            assert record.parity_after == pytest.approx(-record.parity_before)
        assert abs(result.states[-1][vacuum]) == pytest.approx(1.0)


def test_ensemble_guards_the_fock_cutoff():
    params = ModelParams.from_ratios(g=2.0, kappa=0.0, delta=1.0)
    spec = _spec(params, n_max=6, tau_max=math.pi, tau_step=0.1, dt=1e-2)
    psi0 = basis_state(spec.space, "ground", 0)
    with pytest.raises(TruncationError):
        run_ensemble(psi0, spec, n_traj=2, master_seed=1)

    result = run_ensemble(psi0, spec, n_traj=2, master_seed=1, strict=False)
    assert result.truncation_flagged
    assert result.truncation()["max_truncation_population"] > 1e-8
