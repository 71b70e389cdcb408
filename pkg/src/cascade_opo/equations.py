"""Positive-P drift and noise coefficients of the cascaded OPO/SHG cavity.

State vectors use the interleaved ordering ``(a1, a1+, a2, a2+, a3, a3+)``
along axis 0; any trailing axes are treated as a batch.
"""

from __future__ import annotations

import numpy as np

from .model import SystemParams

__all__ = ["drift", "noise_amplitudes", "drift_jacobian"]


def drift(params: SystemParams, v: np.ndarray) -> np.ndarray:
    """Deterministic part of the equations of motion."""
    a1, p1, a2, p2, a3, p3 = v
    g1, g2, g3 = params.gamma1, params.gamma2, params.gamma3
    k1, k2 = params.kappa1, params.kappa2
    e1, e2 = params.eps1, params.eps2
    return np.array([
        e1 - g1 * a1 + k1 * p1 * a2,
        e1.conjugate() - g1 * p1 + k1 * a1 * p2,
        e2 - g2 * a2 + k2 * p2 * a3 - 0.5 * k1 * a1 * a1,
        e2.conjugate() - g2 * p2 + k2 * a2 * p3 - 0.5 * k1 * p1 * p1,
        -g3 * a3 - 0.5 * k2 * a2 * a2,
        -g3 * p3 - 0.5 * k2 * p2 * p2,
    ])


def noise_amplitudes(params: SystemParams, v: np.ndarray) -> np.ndarray:
    """Coefficients multiplying the four real noises on rows a1, a1+, a2, a2+.

    Principal complex square roots; the a3 rows are noiseless.
    """
    _, _, a2, p2, a3, p3 = v
    k1, k2 = params.kappa1, params.kappa2
    return np.sqrt(np.array([k1 * a2, k1 * p2, k2 * a3, k2 * p3], dtype=complex))


def drift_jacobian(params: SystemParams, v: np.ndarray) -> np.ndarray:
    """Analytic Jacobian d(drift)/dv at a single state, shape (6, 6)."""
    a1, p1, a2, p2, a3, p3 = np.asarray(v, dtype=complex)
    g1, g2, g3 = params.gamma1, params.gamma2, params.gamma3
    k1, k2 = params.kappa1, params.kappa2
    J = np.zeros((6, 6), dtype=complex)
    J[0, 0] = -g1
    J[0, 1] = k1 * a2
    J[0, 2] = k1 * p1
    J[1, 0] = k1 * p2
    J[1, 1] = -g1
    J[1, 3] = k1 * a1
    J[2, 0] = -k1 * a1
    J[2, 2] = -g2
    J[2, 3] = k2 * a3
    J[2, 4] = k2 * p2
    J[3, 1] = -k1 * p1
    J[3, 2] = k2 * p3
    J[3, 3] = -g2
    J[3, 5] = k2 * a2
    J[4, 2] = -k2 * a2
    J[4, 4] = -g3
    J[5, 3] = -k2 * p2
    J[5, 5] = -g3
    return J
