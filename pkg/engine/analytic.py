"""Closed-form dynamics of the dissipative Rabi model in the slow-qubit limit.

With the qubit prepared in |g> (or |e>) and the mode in vacuum, the state splits
into the sigma_x sectors |+> (x) |beta(t)> and |-> (x) |-beta(t)>, whose coherence
is damped by the decoherence function F(t):

    beta(t) = (i g / z) (exp(-z t) - 1),        z = kappa / 2 + i Delta
    F(t)    = exp(-2 g^2 / |z|^2 [kappa t + (2 / g) Im(z* beta(t))])

The sector coherence multiplies F(t) exp(2 |beta|^2); it is evaluated as a single
exponential of log F + 2 |beta|^2 since both factors span many orders of
magnitude. Poisson weights are evaluated in log space.

Parity-chain probabilities follow the printed form |beta|^(2n) / n! * P_{g/e,0};
P_{g/e,0} already carries the exp(-|beta|^2) normalization, so
P(+)_n + P(-)_n equals the Poisson weight P_n term by term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln, xlogy

from shared.contracts import FockSpace, ModelParams, QubitLevel
from shared.errors import DegenerateModelError, TruncationError

from .model import Operator, StateVector

logger = logging.getLogger(__name__)

TimeLike = Union[float, NDArray[np.float64]]
Sector = Literal["++", "--", "+-", "-+"]

_SECTOR_SIGNS: dict[str, tuple[int, int]] = {"++": (1, 1), "--": (-1, -1), "+-": (1, -1), "-+": (-1, 1)}


@dataclass(frozen=True)
class AnalyticModel:
    g: float
    delta: float
    kappa: float
    initial_qubit: QubitLevel = "ground"

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise DegenerateModelError(f"kappa must be non-negative, got {self.kappa}")
        if self.kappa == 0 and self.delta == 0:
            raise DegenerateModelError("kappa = 0 and delta = 0: beta(t) grows without bound")
        if self.initial_qubit not in ("ground", "excited"):
            raise DegenerateModelError(f"unknown initial qubit level: {self.initial_qubit}")

    @property
    def z(self) -> complex:
        return complex(0.5 * self.kappa, self.delta)

    @property
    def sign(self) -> int:
        return 1 if self.initial_qubit == "ground" else -1

    @classmethod
    def from_params(cls, params: ModelParams, initial_qubit: QubitLevel = "ground") -> "AnalyticModel":
        return cls(g=params.g, delta=params.delta, kappa=params.kappa, initial_qubit=initial_qubit)


@dataclass(frozen=True)
class AnalyticSnapshot:
    t: float
    beta: complex
    f: float
    p_g: float = 0.0
    p_e: float = 0.0
    mean_photon: float = 0.0
    purity: float = 1.0
    chain_plus: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    chain_minus: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))


class SteadyState(NamedTuple):
    beta_s: complex
    mean_photon_s: float
    energy_s: float


def _check_time(t: TimeLike) -> None:
    if np.any(np.asarray(t) < 0):
        raise ValueError("analytic solution is defined for t >= 0 only")


def beta(model: AnalyticModel, t: TimeLike):
    _check_time(t)
    z = model.z
    return (1j * model.g / z) * np.expm1(-z * np.asarray(t, dtype=float))


def log_decoherence(model: AnalyticModel, t: TimeLike):
    _check_time(t)
    z = model.z
    t_arr = np.asarray(t, dtype=float)
    # Im(z* beta) / g, written without dividing by g
    im_term = np.imag(np.conj(z) * 1j * np.expm1(-z * t_arr) / z)
    return -2.0 * model.g**2 / abs(z) ** 2 * (model.kappa * t_arr + 2.0 * im_term)


def decoherence(model: AnalyticModel, t: TimeLike):
    return np.exp(log_decoherence(model, t))


def log_coherence(model: AnalyticModel, t: TimeLike):
    """log(F(t) exp(2 |beta|^2)); zero in the unitary limit."""
    return log_decoherence(model, t) + 2.0 * np.abs(beta(model, t)) ** 2


def coherence(model: AnalyticModel, t: TimeLike):
    return np.exp(log_coherence(model, t))


def poisson_weights(mean: float, n: Union[int, NDArray[np.int64]]):
    n_arr = np.asarray(n)
    return np.exp(xlogy(n_arr, mean) - mean - gammaln(n_arr + 1))


def joint_prob(model: AnalyticModel, t: float, level: Literal["g", "e"], n: int) -> float:
    if n < 0:
        raise ValueError("photon number must be non-negative")
    mean = float(np.abs(beta(model, t)) ** 2)
    sign = 1 if level == "g" else -1
    c = model.sign * float(coherence(model, t))
    return float(0.5 * poisson_weights(mean, n) * (1.0 + sign * (-1) ** n * c))


def purity(model: AnalyticModel, t: TimeLike):
    return 0.5 * (1.0 + np.exp(2.0 * log_coherence(model, t)))


def qubit_populations(model: AnalyticModel, t: TimeLike):
    f = model.sign * decoherence(model, t)
    return 0.5 * (1.0 + f), 0.5 * (1.0 - f)


def photon_dist(model: AnalyticModel, t: float, n: Union[int, NDArray[np.int64]]):
    return poisson_weights(float(np.abs(beta(model, t)) ** 2), n)


def mean_photon(model: AnalyticModel, t: TimeLike):
    return np.abs(beta(model, t)) ** 2


def chain_prob(model: AnalyticModel, t: float, parity: Literal["+", "-"], n: Union[int, NDArray[np.int64]]):
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("photon number must be non-negative")
    mean = float(np.abs(beta(model, t)) ** 2)
    level: Literal["g", "e"] = "g" if parity == "+" else "e"
    head = joint_prob(model, t, level, 0)
    return np.exp(xlogy(n_arr, mean) - gammaln(n_arr + 1)) * head


def steady_state(model: AnalyticModel) -> SteadyState:
    if model.kappa <= 0:
        raise DegenerateModelError("steady state requires kappa > 0")
    beta_s = -1j * model.g / model.z
    mean_s = 4.0 * model.g**2 / (model.kappa**2 + 4.0 * model.delta**2)
    energy_s = model.delta * abs(beta_s) ** 2 + 2.0 * model.g * beta_s.real
    return SteadyState(beta_s=complex(beta_s), mean_photon_s=float(mean_s), energy_s=float(energy_s))


def coherent_amplitudes(alpha: complex, n_max: int) -> StateVector:
    """<n|alpha> for n = 0..n_max."""
    n = np.arange(n_max + 1)
    radius = abs(alpha)
    if radius == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mod = n * math.log(radius) - 0.5 * radius**2 - 0.5 * gammaln(n + 1)
    return np.exp(log_mod) * np.exp(1j * n * np.angle(alpha))


def _sector_vectors(amplitude: complex, space: FockSpace, tail_tol: float) -> tuple[StateVector, StateVector]:
    plus_mode = coherent_amplitudes(amplitude, space.n_max)
    tail = 1.0 - float(np.vdot(plus_mode, plus_mode).real)
    if tail > tail_tol:
        raise TruncationError(
            f"coherent state |beta|^2={abs(amplitude) ** 2:.3f} loses {tail:.2e} beyond n_max={space.n_max}"
        )
    minus_mode = plus_mode * (-1.0) ** np.arange(space.n_max + 1)
    qubit_plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    qubit_minus = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
    return np.kron(plus_mode, qubit_plus), np.kron(minus_mode, qubit_minus)


def density_matrix(model: AnalyticModel, t: float, space: FockSpace, tail_tol: float = 1e-10) -> Operator:
    """rho(t) = 1/2 [v+ v+^dag + v- v-^dag + c (v+ v-^dag + v- v+^dag)] in the |s, n> basis."""
    b = complex(beta(model, t))
    v_plus, v_minus = _sector_vectors(b, space, tail_tol)
    c = model.sign * float(coherence(model, t))
    rho = np.outer(v_plus, v_plus.conj()) + np.outer(v_minus, v_minus.conj())
    cross = np.outer(v_plus, v_minus.conj())
    rho = 0.5 * (rho + c * (cross + cross.conj().T))
    return rho


def steady_density_matrix(model: AnalyticModel, space: FockSpace, tail_tol: float = 1e-10) -> Operator:
    beta_s = steady_state(model).beta_s
    v_plus, v_minus = _sector_vectors(beta_s, space, tail_tol)
    return 0.5 * (np.outer(v_plus, v_plus.conj()) + np.outer(v_minus, v_minus.conj()))


def char_function(model: AnalyticModel, t: float, alpha: complex, sector: Sector) -> complex:
    """chi_ab(alpha, t) = Tr[rho_ab(t) D(alpha)] for the sigma_x sector blocks."""
    left, right = _SECTOR_SIGNS[sector]
    b = complex(beta(model, t))
    exponent = -0.5 * abs(alpha) ** 2 - left * b * np.conj(alpha) + right * np.conj(b) * alpha
    if left == right:
        return complex(0.5 * np.exp(exponent))
    coefficient = model.sign * float(decoherence(model, t))
    return complex(0.5 * coefficient * np.exp(exponent))


def snapshot(model: AnalyticModel, t: float, n_report: int = 20) -> AnalyticSnapshot:
    b = complex(beta(model, t))
    p_g, p_e = qubit_populations(model, t)
    n = np.arange(n_report + 1)
    return AnalyticSnapshot(
        t=float(t),
        beta=b,
        f=float(decoherence(model, t)),
        p_g=float(p_g),
        p_e=float(p_e),
        mean_photon=abs(b) ** 2,
        purity=float(purity(model, t)),
        chain_plus=np.asarray(chain_prob(model, t, "+", n), dtype=float),
        chain_minus=np.asarray(chain_prob(model, t, "-", n), dtype=float),
    )


def series(model: AnalyticModel, t_grid: NDArray[np.float64], n_report: int = 20) -> dict[str, NDArray[np.float64]]:
    snaps = [snapshot(model, float(t), n_report) for t in t_grid]
    columns: dict[str, NDArray[np.float64]] = {
        "tau": np.asarray(t_grid, dtype=float),
        "mean_photon": np.array([s.mean_photon for s in snaps]),
        "p_g": np.array([s.p_g for s in snaps]),
        "p_e": np.array([s.p_e for s in snaps]),
        "purity": np.array([s.purity for s in snaps]),
    }
    for n in range(n_report + 1):
        columns[f"chain_plus_{n}"] = np.array([s.chain_plus[n] for s in snaps])
    for n in range(n_report + 1):
        columns[f"chain_minus_{n}"] = np.array([s.chain_minus[n] for s in snaps])
    logger.debug("analytic.series.done points=%s n_report=%s", len(t_grid), n_report)
    return columns


def validity_horizon(params: ModelParams) -> Optional[float]:
    """tau scale 1 / (1 - Delta / omega) below which the slow-qubit solution holds."""
    ratio = params.delta / params.omega
    if ratio >= 1.0:
        return None
    return 1.0 / (1.0 - ratio)
