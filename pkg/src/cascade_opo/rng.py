"""Counter-based Gaussian noise (Philox4x32-10 + Box-Muller).

A draw is a pure function of ``(seed, trajectory, step)``: the 64-bit seed
is the Philox key and ``(step, trajectory)`` fill the 128-bit counter. One
block of four 32-bit words yields the four normals used per time step.
"""

from __future__ import annotations

import math

import numba
import numpy as np

__all__ = ["philox4x32", "normals4", "normal_block"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_TWO_PI = 2.0 * math.pi
_INV_2_32 = 1.0 / 4294967296.0


@numba.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x32; all arguments are uint64 holding 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@numba.njit(cache=True)
def _box_muller(u, v):
    # u, v are 32-bit words; shifted by half a unit so u > 0
    x = (np.float64(u) + 0.5) * _INV_2_32
    y = (np.float64(v) + 0.5) * _INV_2_32
    r = math.sqrt(-2.0 * math.log(x))
    return r * math.cos(_TWO_PI * y), r * math.sin(_TWO_PI * y)


@numba.njit(cache=True)
def normals4(seed, traj, step):
    """Four independent standard normals for one (trajectory, step)."""
    s = np.uint64(seed)
    t = np.uint64(traj)
    n = np.uint64(step)
    w0, w1, w2, w3 = philox4x32(n & _MASK, n >> _S32, t & _MASK, t >> _S32, s & _MASK, s >> _S32)
    z0, z1 = _box_muller(w0, w1)
    z2, z3 = _box_muller(w2, w3)
    return z0, z1, z2, z3


@numba.njit(cache=True)
def _fill(seed, traj, step0, out):
    for n in range(out.shape[0]):
        z0, z1, z2, z3 = normals4(seed, traj, step0 + n)
        out[n, 0] = z0
        out[n, 1] = z1
        out[n, 2] = z2
        out[n, 3] = z3


def normal_block(seed: int, traj: int, n_steps: int, step0: int = 0) -> np.ndarray:
    """Normals for steps ``step0 .. step0 + n_steps - 1`` of one trajectory, shape (n_steps, 4)."""
    if not (0 <= seed < 2**64 and 0 <= traj < 2**64 and step0 >= 0):
        raise ValueError("seed, trajectory and step must be non-negative 64-bit integers")
    out = np.empty((n_steps, 4))
    _fill(np.uint64(seed), np.uint64(traj), np.uint64(step0), out)
    return out
