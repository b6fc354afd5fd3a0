"""Integrated squared error and Brier score over a time window."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricWindow:
    t_max: float = 120.0
    n_t: int = 121

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.n_t < 2:
            raise ValueError("window grid needs at least 2 points")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_t)


def mise(estimate, truth, grid) -> float:
    """Trapezoid integral of the squared difference over ``grid``.

    2-D inputs (subjects x grid) are integrated row-wise and then averaged.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if estimate.shape != truth.shape or estimate.shape[-1] != grid.size:
        raise ValueError(
            f"shape mismatch: estimate {estimate.shape}, truth {truth.shape}, grid {grid.shape}"
        )
    ise = trapezoid((estimate - truth) ** 2, grid, axis=-1)
    return float(np.mean(ise))


def brier(predicted_survival, times, events, t_grid) -> float:
    """Window-averaged Brier score without censoring weights.

    At each ``t`` the outcome is ``1{Y <= t, event}`` and the prediction is
    ``1 - S_hat(t)``; subjects censored before ``t`` are left out of that
    time's average. Per-time averages are then averaged over the grid,
    skipping times with nobody at risk of classification.
    """
    S = np.asarray(predicted_survival, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    t_grid = np.asarray(t_grid, dtype=float)
    if S.shape != (times.size, t_grid.size):
        raise ValueError(f"predicted survival must be {(times.size, t_grid.size)}, got {S.shape}")
    T = t_grid[None, :]
    Y = times[:, None]
    observed = (Y <= T) & events[:, None]
    censored_before = (Y < T) & ~events[:, None]
    keep = ~censored_before
    err = ((1.0 - S) - observed) ** 2
    counts = keep.sum(axis=0)
    valid = counts > 0
    if not valid.all():
        log.warning("%d window time(s) had no classifiable subjects and were skipped", int((~valid).sum()))
    if not valid.any():
        return float("nan")
    per_t = (err * keep).sum(axis=0)[valid] / counts[valid]
    return float(per_t.mean())
