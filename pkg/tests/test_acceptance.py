"""Long checks against the published curves; run with ``pytest -m slow``."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cli.compare import compare
from cli.runner import ExperimentRunner
from engine import analytic
from engine.analytic import AnalyticModel
from engine.mesolve import EvolutionSpec, evolve, steady
from engine.model import basis_state, projector
from engine.observables import measure, trace_distance
from engine.settings import EngineSettings
from engine.stepper import StepControl
from shared.contracts import FockSpace, ModelParams
from shared.grids import tau_grid

pytestmark = pytest.mark.slow

_FULL = FockSpace(n_max=64)


def _exact_spec(params, mode, tau_max, tau_step, rtol=1e-10):
    return EvolutionSpec(
        hamiltonian_mode=mode,
        params=params,
        space=_FULL,
        t_grid=tau_grid(tau_max, tau_step),
        initial=projector(basis_state(_FULL, "ground", 0)),
        step_control=StepControl(rtol=rtol),
    )


@pytest.mark.parametrize("kappa", [0.01, 0.2])
def test_slow_qubit_master_equation_reproduces_closed_form(kappa):
    params = ModelParams.from_ratios(g=2.0, kappa=kappa, delta=1.0)
    model = AnalyticModel.from_params(params)
    checkpoints = (math.pi, 2 * math.pi, 4 * math.pi)
    for t, rho in evolve(_exact_spec(params, "slow_qubit", 12 * math.pi, math.pi / 8)):
        obs = measure(rho, _FULL)
        snap = analytic.snapshot(model, t, n_report=20)
        assert abs(obs.mean_photon - snap.mean_photon) <= 1e-5 * (1.0 + snap.mean_photon)
        assert np.max(np.abs(obs.chain_plus[:21] - snap.chain_plus)) <= 1e-6
        assert np.max(np.abs(obs.chain_minus[:21] - snap.chain_minus)) <= 1e-6
        if any(math.isclose(t, target) for target in checkpoints):
            assert trace_distance(rho, analytic.density_matrix(model, t, _FULL)) <= 1e-6


def test_jump_unraveling_tracks_master_equation_at_small_detuning(tmp_path):
    runner = ExperimentRunner(EngineSettings(output_dir=str(tmp_path)))
    common = {"g_over_omega": 2.0, "kappa_over_omega": 0.01, "tau_max": 10.0, "tau_step": 0.1}
    lab = {**common, "hamiltonian_mode": "full_lab", "delta_over_omega": 0.8, "n_max": 64}
    reference = runner.run_to_file({**common, "engine": "analytic", "delta_over_omega": 1.0}, tmp_path / "analytic.csv")
    exact = runner.run_to_file({**lab, "engine": "mesolve", "rtol": 1e-9}, tmp_path / "mesolve.csv")
    trajectories = runner.run_to_file({**lab, "engine": "mcwf", "n_traj": 1000, "master_seed": 12345}, tmp_path / "mcwf.csv")

    assert compare(exact, trajectories, metric="max_rel", tau_limit=9.0, floor=0.5).value < 0.01

    # Against the far-detuned closed form the lab-frame curves peak at 4.3 % near tau = 6.7,
    # where the reference mean photon number is 0.67. The exact master equation shows the
    # same 4.3 %, so the excess over the 4 % quoted for this comparison is a model
    # difference between detunings 0.8 and 1, not sampling noise.
    from_closed_form = compare(reference, trajectories, metric="max_rel", tau_limit=9.0, floor=0.5).value
    assert from_closed_form < 0.05
    assert from_closed_form == pytest.approx(
        compare(reference, exact, metric="max_rel", tau_limit=9.0, floor=0.5).value, abs=5e-3
    )


def _detuning_errors(tmp_path) -> dict[float, float]:
    runner = ExperimentRunner(EngineSettings(output_dir=str(tmp_path)))
    common = {"g_over_omega": 2.0, "kappa_over_omega": 0.01, "tau_max": 9.0, "tau_step": 0.05}
    reference = runner.run_to_file({**common, "engine": "analytic", "delta_over_omega": 1.0}, tmp_path / "analytic.csv")
    errors = {}
    for delta in (0.75, 0.5, 0.25, 0.0):
        numeric = runner.run_to_file(
            {**common, "engine": "mesolve", "hamiltonian_mode": "full_lab", "delta_over_omega": delta, "n_max": 64, "rtol": 1e-8},
            tmp_path / f"mesolve_{delta:g}.csv",
        )
        errors[delta] = compare(reference, numeric, metric="rel_at_tau", tau_star=8.5).value
    return errors


def test_detuning_error_grows_towards_resonance(tmp_path):
    errors = _detuning_errors(tmp_path)
    ordered = [errors[delta] for delta in (0.75, 0.5, 0.25, 0.0)]
    assert all(later > earlier for earlier, later in zip(ordered, ordered[1:]))


@pytest.mark.xfail(
    strict=False,
    reason=(
        "measured rel_at_tau(8.5) is 2.1/5.5/9.7/14.7 % against the quoted 7/17/29/38 %; "
        "a peak-height measure gives 2.1/5.0/8.6/12.5 %, so the gap is not a choice of error measure"
    ),
)
def test_detuning_error_ladder_matches_published_values(tmp_path):
    errors = _detuning_errors(tmp_path)
    for delta, expected in ((0.75, 0.07), (0.5, 0.17), (0.25, 0.29), (0.0, 0.38)):
        assert errors[delta] == pytest.approx(expected, abs=0.03)


@pytest.mark.parametrize("g,delta,kappa", [(2.0, 1.0, 0.2), (2.0, 1.0, 0.5), (1.0, 1.0, 0.3)])
def test_master_equation_relaxes_to_the_coherent_mixture(g, delta, kappa):
    params = ModelParams.from_ratios(g=g, kappa=kappa, delta=delta)
    result = steady(_exact_spec(params, "slow_qubit", 1.0, 1.0, rtol=1e-8), epsilon=1e-6, check_interval=10.0)
    obs = measure(result.rho, _FULL)
    assert obs.mean_photon == pytest.approx(4 * g**2 / (kappa**2 + 4 * delta**2), rel=1e-2)
    assert obs.purity == pytest.approx(0.5, abs=1e-2)
    target = analytic.steady_density_matrix(AnalyticModel.from_params(params), _FULL)
    assert trace_distance(result.rho, target) < 1e-3


@pytest.mark.parametrize("mode", ["slow_qubit", "full_lab"])
def test_unitary_dynamics_stays_in_the_even_chain(mode):
    params = ModelParams.from_ratios(g=2.0, kappa=0.0, delta=1.0)
    for t, rho in evolve(_exact_spec(params, mode, 12 * math.pi, math.pi / 4)):
        assert measure(rho, _FULL).chain_minus.sum() < 1e-9
    model = AnalyticModel.from_params(params)
    for t in np.linspace(0.0, 12 * math.pi, 97):
        assert analytic.chain_prob(model, float(t), "-", np.arange(65)).sum() < 1e-9
