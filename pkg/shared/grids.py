from __future__ import annotations

import numpy as np


def tau_grid(tau_max: float, tau_step: float) -> np.ndarray:
    """Uniform grid from 0 with spacing tau_step; tau_max is appended when off-grid."""
    if tau_step <= 0 or tau_max <= 0:
        raise ValueError("tau_step and tau_max must be positive")
    count = int(np.floor(tau_max / tau_step + 1e-9))
    grid = tau_step * np.arange(count + 1, dtype=float)
    if tau_max - grid[-1] > 1e-9 * max(1.0, tau_max):
        grid = np.append(grid, tau_max)
    return grid
