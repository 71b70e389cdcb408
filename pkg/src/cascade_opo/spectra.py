"""Linearized fluctuation spectra of the output fields.

The fluctuations about a stable steady state form an Ornstein-Uhlenbeck
process ``d(dv) = -A dv dt + B dW`` with ``D = B B^T``. The intracavity
spectral matrix is ``S(w) = (A + iwI)^-1 D (A^T - iwI)^-1``; output
quadrature moments follow from the input-output relations.

Quadratures are ``X = a + a^dag`` and ``Y = -i(a - a^dag)`` so the vacuum
variance is 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import N_MODES, SystemParams, x_row, y_row

__all__ = [
    "SpectrumError",
    "FluctuationMatrices",
    "SpectrumTable",
    "drift_matrix",
    "diffusion_matrix",
    "fluctuation_matrices",
    "spectral_matrix",
    "quadrature_matrix",
    "quadrature_spectra",
    "quadrature_fluctuations",
    "output_moment",
    "output_moments",
    "spectrum_table",
    "COND_LIMIT",
    "IMAG_TOL",
]

COND_LIMIT = 1e12
IMAG_TOL = 1e-9

_Q_BLOCK = np.array([[1.0, 1.0], [-1.0j, 1.0j]])


class SpectrumError(ArithmeticError):
    """Singular resolvent or a numerically inconsistent output moment."""

    def __init__(self, message: str, omega: float | None = None):
        super().__init__(message)
        self.omega = omega


@dataclass(frozen=True)
class FluctuationMatrices:
    A: np.ndarray
    D: np.ndarray


def _means(ss):
    state = getattr(ss, "state", ss)
    return state.alpha, state.alpha_plus


def drift_matrix(params: SystemParams, ss) -> np.ndarray:
    """Drift matrix ``A`` at a steady state (a ``SteadyState`` or ``PhaseSpaceState``).

    Conjugated amplitudes are read as the means of the plus variables.
    """
    (a1, a2, a3), (c1, c2, c3) = _means(ss)
    g1, g2, g3 = params.gamma1, params.gamma2, params.gamma3
    k1, k2 = params.kappa1, params.kappa2
    return np.array([
        [g1, -k1 * a2, -k1 * c1, 0, 0, 0],
        [-k1 * c2, g1, 0, -k1 * a1, 0, 0],
        [k1 * a1, 0, g2, -k2 * a3, -k2 * c2, 0],
        [0, k1 * c1, -k2 * c3, g2, 0, -k2 * a2],
        [0, 0, k2 * a2, 0, g3, 0],
        [0, 0, 0, k2 * c2, 0, g3],
    ], dtype=complex)


def diffusion_matrix(params: SystemParams, ss) -> np.ndarray:
    """Diagonal diffusion matrix. Entries may be negative; never factorize it."""
    (_, a2, a3), (_, c2, c3) = _means(ss)
    k1, k2 = params.kappa1, params.kappa2
    return np.diag(np.array([k1 * a2, k1 * c2, k2 * a3, k2 * c3, 0, 0], dtype=complex))


def fluctuation_matrices(params: SystemParams, ss) -> FluctuationMatrices:
    return FluctuationMatrices(drift_matrix(params, ss), diffusion_matrix(params, ss))


def _solve_guarded(M: np.ndarray, rhs: np.ndarray, omega: float) -> np.ndarray:
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SpectrumError(f"resolvent is singular at omega={omega!r} (cond={cond:.3g})", omega)
    return np.linalg.solve(M, rhs)


def spectral_matrix(A: np.ndarray, D: np.ndarray, omega: float) -> np.ndarray:
    """Intracavity spectral matrix at one frequency."""
    eye = np.eye(A.shape[0])
    left = _solve_guarded(A + 1j * omega * eye, D, omega)
    # X (A^T - iw) = left  <=>  (A - iw) X^T = left^T
    right = _solve_guarded(A - 1j * omega * eye, left.T, omega)
    return right.T


def quadrature_matrix() -> np.ndarray:
    """Block-diagonal map from (da, da+) pairs to (dX, dY) pairs."""
    return np.kron(np.eye(N_MODES), _Q_BLOCK)


def quadrature_spectra(S: np.ndarray) -> np.ndarray:
    Q = quadrature_matrix()
    return Q @ S @ Q.T


def quadrature_fluctuations(A: np.ndarray, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drift and diffusion in the quadrature basis: ``Q A Q^-1`` and ``Q D Q^T``.

    ``spectral_matrix`` of these equals ``quadrature_spectra(spectral_matrix(A, D, w))``
    but avoids the cancellation between large amplitude-basis entries that
    costs digits in strongly squeezed quadratures.
    """
    Q = quadrature_matrix()
    Q_inv = Q.conj().T / 2
    return Q @ A @ Q_inv, Q @ D @ Q.T


def _moment_complex(i: int, j: int, quad: str, Sq: np.ndarray, params: SystemParams) -> complex:
    if quad == "X":
        r, c = x_row(i), x_row(j)
    elif quad == "Y":
        r, c = y_row(i), y_row(j)
    else:
        raise ValueError(f"quad must be 'X' or 'Y', got {quad!r}")
    g = params.gammas
    return float(i == j) + np.sqrt(g[i - 1] * g[j - 1]) * (Sq[r, c] + Sq[c, r])


def output_moment(i: int, j: int, quad: str, Sq: np.ndarray, params: SystemParams) -> float:
    """Output variance (i == j) or covariance of X or Y quadratures of modes i, j."""
    v = _moment_complex(i, j, quad, Sq, params)
    if abs(v.imag) > IMAG_TOL * max(1.0, abs(v.real)):
        raise SpectrumError(f"V({quad}{i},{quad}{j}) has imaginary part {v.imag:.3g}")
    return float(v.real)


def output_moments(Sq: np.ndarray, params: SystemParams) -> dict[str, np.ndarray]:
    """All X and Y variance/covariance matrices, as ``{"X": 3x3, "Y": 3x3}``."""
    out = {}
    for quad in ("X", "Y"):
        V = np.empty((N_MODES, N_MODES))
        for i in range(1, N_MODES + 1):
            for j in range(i, N_MODES + 1):
                V[i - 1, j - 1] = V[j - 1, i - 1] = output_moment(i, j, quad, Sq, params)
        out[quad] = V
    return out


def column_names() -> list[str]:
    cols = []
    for i in range(1, N_MODES + 1):
        cols += [f"V_X{i}", f"V_Y{i}"]
    for i, j in combinations(range(1, N_MODES + 1), 2):
        cols += [f"V_X{i}X{j}", f"V_Y{i}Y{j}"]
    return cols


@dataclass
class SpectrumTable:
    """Output quadrature moments on a frequency grid.

    ``VX[n]`` and ``VY[n]`` are the 3x3 variance/covariance matrices at
    ``omegas[n]``. ``failed`` marks frequencies where the resolvent was
    singular; their rows are NaN.
    """

    omegas: np.ndarray
    VX: np.ndarray
    VY: np.ndarray
    failed: np.ndarray

    def variance(self, quad: str, i: int) -> np.ndarray:
        return self._pick(quad)[:, i - 1, i - 1]

    def covariance(self, quad: str, i: int, j: int) -> np.ndarray:
        return self._pick(quad)[:, i - 1, j - 1]

    def _pick(self, quad: str) -> np.ndarray:
        return {"X": self.VX, "Y": self.VY}[quad]

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"omega": self.omegas}
        for i in range(1, N_MODES + 1):
            cols[f"V_X{i}"] = self.variance("X", i)
            cols[f"V_Y{i}"] = self.variance("Y", i)
        for i, j in combinations(range(1, N_MODES + 1), 2):
            cols[f"V_X{i}X{j}"] = self.covariance("X", i, j)
            cols[f"V_Y{i}Y{j}"] = self.covariance("Y", i, j)
        return cols


def spectrum_table(params: SystemParams, ss, omegas, *, strict: bool = False) -> SpectrumTable:
    """Evaluate the output moments over ``omegas``.

    With ``strict`` a singular frequency raises; otherwise it is flagged.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    A = drift_matrix(params, ss)
    D = diffusion_matrix(params, ss)
    Aq, Dq = quadrature_fluctuations(A, D)
    n = omegas.size
    VX = np.full((n, N_MODES, N_MODES), np.nan)
    VY = np.full((n, N_MODES, N_MODES), np.nan)
    failed = np.zeros(n, dtype=bool)
    for k, w in enumerate(omegas):
        try:
            m = output_moments(spectral_matrix(Aq, Dq, w), params)
        except SpectrumError:
            if strict:
                raise
            failed[k] = True
            continue
        VX[k], VY[k] = m["X"], m["Y"]
    return SpectrumTable(omegas, VX, VY, failed)
