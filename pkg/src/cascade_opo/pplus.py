"""Stochastic integration of the positive-P equations over trajectory ensembles.

Each trajectory draws its noise from a counter-based generator addressed
by ``(master_seed, trajectory_index, step)``, so ensemble results
do not depend on how trajectories are split between workers. Trajectories
are grouped into fixed-size batches; per-batch sums are reduced in batch
order, which makes the reduction bit-reproducible for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .classical import Trajectory
from .model import PhaseSpaceState, SystemParams
from .rng import normals4

__all__ = [
    "BATCH_SIZE",
    "EnsembleStats",
    "simulate_trajectory",
    "run_ensemble",
]

BATCH_SIZE = 250


def _check_seed(seed: int, index: int) -> None:
    if not (0 <= seed < 2**64 and 0 <= index < 2**64):
        raise ValueError("seed and trajectory index must be non-negative 64-bit integers")


@numba.njit(cache=True)
def _csqrt(z):
    # principal square root; a signed-zero imaginary part picks the branch like cmath.sqrt.
    # The larger component comes from a sqrt, the smaller from y / 2t (no cancellation).
    x, y = z.real, z.imag
    m2 = x * x + y * y
    # hypot is slow; only needed where the squares under/overflow
    r = math.sqrt(m2) if 1e-290 < m2 < 1e290 else math.hypot(x, y)
    t = math.sqrt(0.5 * (r + abs(x)))
    if t == 0.0:
        return complex(0.0, y)
    if x >= 0.0:
        return complex(t, y / (2.0 * t))
    return complex(abs(y) / (2.0 * t), math.copysign(t, y))


@numba.njit(cache=True)
def _em_kernel(v, seed, traj0, n_steps, dt, coeffs, e1, e2, bound2, noise_scale, alive, samples, sample_every):
    """Euler-Maruyama for every trajectory of a batch.

    v: (n, 6) complex initial states, overwritten with final states;
    samples: (n_samples, n, 6) filled at multiples of ``sample_every``.
    Trajectory k of the batch draws its noise with index ``traj0 + k``.
    """
    g1, g2, g3, k1, k2 = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]
    e1c = e1.conjugate()
    e2c = e2.conjugate()
    sqdt = math.sqrt(dt) * noise_scale
    for k in range(v.shape[0]):
        a1 = v[k, 0]
        p1 = v[k, 1]
        a2 = v[k, 2]
        p2 = v[k, 3]
        a3 = v[k, 4]
        p3 = v[k, 5]
        traj = traj0 + k
        for n in range(n_steps):
            z1, z2, z3, z4 = normals4(seed, traj, n)
            d1 = (e1 - g1 * a1 + k1 * p1 * a2) * dt + _csqrt(k1 * a2) * (sqdt * z1)
            d2 = (e1c - g1 * p1 + k1 * a1 * p2) * dt + _csqrt(k1 * p2) * (sqdt * z2)
            d3 = (e2 - g2 * a2 + k2 * p2 * a3 - 0.5 * k1 * a1 * a1) * dt + _csqrt(k2 * a3) * (sqdt * z3)
            d4 = (e2c - g2 * p2 + k2 * a2 * p3 - 0.5 * k1 * p1 * p1) * dt + _csqrt(k2 * p3) * (sqdt * z4)
            d5 = (-g3 * a3 - 0.5 * k2 * a2 * a2) * dt
            d6 = (-g3 * p3 - 0.5 * k2 * p2 * p2) * dt
            a1 += d1
            p1 += d2
            a2 += d3
            p2 += d4
            a3 += d5
            p3 += d6
            m = max(_abs2(a1), _abs2(p1), _abs2(a2), _abs2(p2), _abs2(a3), _abs2(p3))
            if not (m <= bound2):
                alive[k] = False
                break
            if (n + 1) % sample_every == 0:
                s = (n + 1) // sample_every
                samples[s, k, 0] = a1
                samples[s, k, 1] = p1
                samples[s, k, 2] = a2
                samples[s, k, 3] = p2
                samples[s, k, 4] = a3
                samples[s, k, 5] = p3
        v[k, 0] = a1
        v[k, 1] = p1
        v[k, 2] = a2
        v[k, 3] = p2
        v[k, 4] = a3
        v[k, 5] = p3


@numba.njit(cache=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


def _step_count(dt: float, t_final: float, sample_every: int) -> int:
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    n_steps = int(round(t_final / dt))
    if not math.isclose(n_steps * dt, t_final, rel_tol=1e-9):
        raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
    if n_steps % sample_every:
        raise ValueError("number of steps must be a multiple of sample_every")
    return n_steps


def _integrate_batch(params, seed, traj0, n, initial, dt, n_steps, sample_every, bound, noisy=True):
    v = np.tile(initial.to_vector(), (n, 1))
    samples = np.zeros((n_steps // sample_every + 1, n, 6), dtype=complex)
    samples[0] = v
    alive = np.ones(n, dtype=np.bool_)
    coeffs = np.array([params.gamma1, params.gamma2, params.gamma3, params.kappa1, params.kappa2])
    _em_kernel(v, np.uint64(seed), np.uint64(traj0), n_steps, dt, coeffs, complex(params.eps1),
               complex(params.eps2), float(bound) ** 2, 1.0 if noisy else 0.0, alive, samples, sample_every)
    return samples, alive


def simulate_trajectory(
    params: SystemParams,
    trajectory_seed: tuple[int, int] | int,
    dt: float,
    t_final: float,
    initial: PhaseSpaceState | None = None,
    *,
    sample_every: int = 1,
    bound: float = 1e6,
    noisy: bool = True,
) -> Trajectory:
    """One Euler-Maruyama trajectory of the full stochastic equations.

    ``trajectory_seed`` is ``(master_seed, index)`` or a bare seed (index 0).
    ``noisy=False`` zeroes every noise increment. The returned trajectory has
    ``divergent`` set when any variable exceeded ``bound``; samples after
    that point are left at zero.
    """
    if initial is None:
        initial = PhaseSpaceState.vacuum()
    seed, index = (trajectory_seed, 0) if isinstance(trajectory_seed, int) else trajectory_seed
    n_steps = _step_count(dt, t_final, sample_every)
    _check_seed(seed, index)
    samples, alive = _integrate_batch(params, seed, index, 1, initial, dt, n_steps, sample_every, bound, noisy)
    times = np.arange(samples.shape[0]) * (sample_every * dt)
    traj = Trajectory(times, samples[:, 0, :])
    traj.divergent = not bool(alive[0])
    return traj


@dataclass
class EnsembleStats:
    """Ensemble-averaged intensities with standard errors.

    ``meanN`` is the real part of the mean of alpha_plus * alpha and
    ``meanN_imag`` its imaginary part, which should vanish statistically.
    """

    times: np.ndarray
    meanN: np.ndarray
    stderrN: np.ndarray
    meanN_imag: np.ndarray
    stderrN_imag: np.ndarray
    n_traj: int
    n_discarded: int
    seed: int
    discard_budget: float = 1e-3
    settings: dict = field(default_factory=dict)

    @property
    def n_kept(self) -> int:
        return self.n_traj - self.n_discarded

    @property
    def valid(self) -> bool:
        return self.n_discarded <= self.discard_budget * self.n_traj

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.times}
        for i in range(3):
            cols[f"meanN{i + 1}"] = self.meanN[:, i]
        for i in range(3):
            cols[f"stderrN{i + 1}"] = self.stderrN[:, i]
        return cols

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "n_traj": self.n_traj,
            "n_discarded": self.n_discarded,
            "discard_budget": self.discard_budget,
            "valid": self.valid,
            "final_meanN": self.meanN[-1].tolist(),
            "final_stderrN": self.stderrN[-1].tolist(),
            "settings": self.settings,
        }


def _batch_sums(args):
    params, seed, start, stop, initial, dt, n_steps, sample_every, bound = args
    samples, alive = _integrate_batch(params, seed, start, stop - start, initial, dt, n_steps, sample_every, bound)
    kept = samples[:, alive, :]
    N = kept[:, :, 1::2] * kept[:, :, 0::2]
    return (
        N.real.sum(axis=1),
        (N.real**2).sum(axis=1),
        N.imag.sum(axis=1),
        (N.imag**2).sum(axis=1),
        int(alive.sum()),
    )


def run_ensemble(
    params: SystemParams,
    n_traj: int,
    dt: float,
    t_final: float,
    master_seed: int,
    *,
    initial: PhaseSpaceState | None = None,
    sample_every: int = 100,
    bound: float = 1e6,
    discard_budget: float = 1e-3,
    workers: int = 1,
    batch_size: int = BATCH_SIZE,
) -> EnsembleStats:
    """Average ``n_traj`` trajectories; deterministic in ``master_seed``."""
    if n_traj < 2:
        raise ValueError("n_traj must be at least 2")
    _check_seed(master_seed, n_traj - 1)
    if initial is None:
        initial = PhaseSpaceState.vacuum()
    n_steps = _step_count(dt, t_final, sample_every)
    jobs = [
        (params, master_seed, start, min(start + batch_size, n_traj), initial, dt, n_steps, sample_every, bound)
        for start in range(0, n_traj, batch_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_sums, jobs))
    else:
        results = [_batch_sums(job) for job in jobs]

    s_re, q_re, s_im, q_im, kept = (
        np.zeros_like(results[0][0]), np.zeros_like(results[0][0]),
        np.zeros_like(results[0][0]), np.zeros_like(results[0][0]), 0,
    )
    for r in results:
        s_re += r[0]
        q_re += r[1]
        s_im += r[2]
        q_im += r[3]
        kept += r[4]
    if kept < 2:
        raise RuntimeError("fewer than two trajectories survived")

    def mean_err(s, q):
        mean = s / kept
        var = np.maximum(q - kept * mean**2, 0.0) / (kept - 1)
        return mean, np.sqrt(var / kept)

    mean_re, err_re = mean_err(s_re, q_re)
    mean_im, err_im = mean_err(s_im, q_im)
    times = np.arange(n_steps // sample_every + 1) * (sample_every * dt)
    settings = {"dt": dt, "t_final": t_final, "sample_every": sample_every, "bound": bound,
                "batch_size": batch_size, "initial": [[a.real, a.imag] for a in initial.alpha]}
    return EnsembleStats(times, mean_re, err_re, mean_im, err_im, n_traj, n_traj - kept,
                         master_seed, discard_budget, settings)
