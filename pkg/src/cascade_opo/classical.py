"""Noise-free integration of the equations of motion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equations import drift
from .model import PhaseSpaceState, SystemParams

__all__ = ["DivergenceError", "Trajectory", "integrate_classical", "rk4_step", "local_maxima", "oscillation_metric"]


class DivergenceError(FloatingPointError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass
class Trajectory:
    """Sampled solution; ``states`` has shape (n_samples, 6) in interleaved order."""

    times: np.ndarray
    states: np.ndarray
    divergent: bool = False

    @property
    def alpha(self) -> np.ndarray:
        return self.states[:, 0::2]

    @property
    def alpha_plus(self) -> np.ndarray:
        return self.states[:, 1::2]

    @property
    def intensities(self) -> np.ndarray:
        """N_i(t) = alpha_plus_i * alpha_i, shape (n_samples, 3)."""
        return (self.alpha_plus * self.alpha).real

    def state_at(self, k: int) -> PhaseSpaceState:
        return PhaseSpaceState.from_vector(self.states[k])

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.times}
        N = self.intensities
        for i in range(3):
            cols[f"N{i + 1}"] = N[:, i]
        for i in range(3):
            cols[f"re_alpha{i + 1}"] = self.alpha[:, i].real
            cols[f"im_alpha{i + 1}"] = self.alpha[:, i].imag
        return cols


def rk4_step(params: SystemParams, v: np.ndarray, dt: float) -> np.ndarray:
    k1 = drift(params, v)
    k2 = drift(params, v + 0.5 * dt * k1)
    k3 = drift(params, v + 0.5 * dt * k2)
    k4 = drift(params, v + dt * k3)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_classical(
    params: SystemParams,
    initial: PhaseSpaceState,
    dt: float,
    t_final: float,
    sample_every: int = 1,
    bound: float = 1e12,
) -> Trajectory:
    """Fixed-step RK4 integration from ``initial`` up to ``t_final``.

    Samples are taken every ``sample_every`` steps, including t = 0 and the
    final step. Raises :class:`DivergenceError` if the state leaves ``bound``.
    """
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    n_steps = int(round(t_final / dt))
    if not np.isclose(n_steps * dt, t_final, rtol=1e-9, atol=0.0):
        raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
    if n_steps % sample_every:
        raise ValueError("number of steps must be a multiple of sample_every")
    n_samples = n_steps // sample_every + 1
    states = np.empty((n_samples, 6), dtype=complex)
    v = initial.to_vector()
    states[0] = v
    for n in range(1, n_steps + 1):
        v = rk4_step(params, v, dt)
        if n % sample_every == 0:
            if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > bound:
                raise DivergenceError(f"classical state diverged at t={n * dt:g}", n * dt)
            states[n // sample_every] = v
    times = np.arange(n_samples) * (sample_every * dt)
    return Trajectory(times, states)


def local_maxima(y: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima."""
    y = np.asarray(y)
    return np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])) + 1


def oscillation_metric(times, y, t_start: float = 20.0, t_end: float | None = None) -> tuple[int, float]:
    """Count late-time local maxima of ``y`` and its peak-to-trough ratio.

    Returns ``(n_maxima, max(y) / min(y))`` over ``t_start <= t <= t_end``.
    """
    times = np.asarray(times)
    y = np.asarray(y)
    mask = times >= t_start
    if t_end is not None:
        mask &= times <= t_end
    window = y[mask]
    if window.size < 3:
        return 0, 1.0
    lo = window.min()
    ratio = np.inf if lo <= 0 else float(window.max() / lo)
    return int(local_maxima(window).size), ratio


def self_pulsing(times, y, t_start: float = 20.0, t_end: float | None = None,
                 min_maxima: int = 3, min_ratio: float = 1.5) -> bool:
    """Sustained oscillation: enough late maxima *and* a large peak-to-trough ratio."""
    n, ratio = oscillation_metric(times, y, t_start, t_end)
    return n >= min_maxima and ratio > min_ratio
