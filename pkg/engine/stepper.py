"""Time steppers shared by the master-equation and trajectory solvers.

The default is classical fourth-order Runge-Kutta with a fixed step, which makes
runs bit-reproducible. Passing ``rtol`` switches to scipy's adaptive DOP853.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from shared.errors import NonConvergenceError

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]
Rhs = Callable[[Array], Array]


@dataclass(frozen=True)
class StepControl:
    dt: Optional[float] = 1e-3
    rtol: Optional[float] = None
    atol: float = 1e-12

    @property
    def adaptive(self) -> bool:
        return self.rtol is not None

    def __post_init__(self) -> None:
        if self.rtol is None and (self.dt is None or self.dt <= 0):
            raise ValueError("fixed-step control needs dt > 0")


def rk4_step(rhs: Rhs, y: Array, h: float) -> Array:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def substeps(span: float, dt: float) -> tuple[int, float]:
    """Split an interval into equal steps no longer than dt."""
    count = max(1, math.ceil(span / dt - 1e-9))
    return count, span / count


def rk4_propagator(generator: Array, h: float) -> Array:
    """Matrix of one RK4 step for the linear ODE y' = generator @ y."""
    x = h * generator
    out = np.eye(generator.shape[0], dtype=complex)
    term = np.eye(generator.shape[0], dtype=complex)
    for order in range(1, 5):
        term = term @ x / order
        out = out + term
    return out


def rk4_apply(generator: Array, y: Array, h: float) -> Array:
    """One RK4 step of y' = generator @ y, Horner form (no matrix products)."""
    x = h * y
    out = y + (generator @ x) / 4.0
    out = y + (generator @ (h * out)) / 3.0
    out = y + (generator @ (h * out)) / 2.0
    return y + generator @ (h * out)


def integrate(
    rhs: Rhs,
    y0: Array,
    t_grid: NDArray[np.float64],
    control: StepControl,
) -> Iterator[tuple[float, Array]]:
    """Yield (t, y) at every grid time, starting with (t_grid[0], y0)."""
    if control.adaptive:
        yield from _integrate_adaptive(rhs, y0, t_grid, control)
        return
    y = np.array(y0, dtype=complex, copy=True)
    yield float(t_grid[0]), y
    for t_prev, t_next in zip(t_grid[:-1], t_grid[1:]):
        count, h = substeps(float(t_next - t_prev), float(control.dt))
        for _ in range(count):
            y = rk4_step(rhs, y, h)
        yield float(t_next), y


def _integrate_adaptive(
    rhs: Rhs,
    y0: Array,
    t_grid: NDArray[np.float64],
    control: StepControl,
) -> Iterator[tuple[float, Array]]:
    shape = y0.shape

    def flat_rhs(_t: float, flat: Array) -> Array:
        return rhs(flat.reshape(shape)).ravel()

    solution = solve_ivp(
        flat_rhs,
        t_span=(float(t_grid[0]), float(t_grid[-1])),
        y0=np.asarray(y0, dtype=complex).ravel(),
        t_eval=np.asarray(t_grid, dtype=float),
        method="DOP853",
        rtol=control.rtol,
        atol=control.atol,
    )
    if not solution.success:
        raise NonConvergenceError(f"adaptive integration failed: {solution.message}")
    logger.debug("stepper.adaptive.done nfev=%s", solution.nfev)
    for k, t in enumerate(solution.t):
        yield float(t), solution.y[:, k].reshape(shape)
