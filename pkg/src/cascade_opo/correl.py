"""Squeezing, EPR-steering and tripartite witnesses built from output spectra.

Witnesses take a :class:`~cascade_opo.spectra.SpectrumTable` (or the pair of
3x3 moment matrices at one frequency) and are vectorized over frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .model import SystemParams
from .spectra import SpectrumTable, spectrum_table
from .steady import (
    BranchDomainError,
    ConvergenceError,
    SteadyState,
    StabilityError,
    steady_below,
    steady_state,
)

__all__ = [
    "DegenerateInputError",
    "WitnessTable",
    "EPR_PAIRS",
    "VLF_ROTATIONS",
    "squeezing_analytic_below",
    "covariance_analytic_below",
    "reid_epr",
    "vlf",
    "obr",
    "obr_best",
    "genuine_steering_sum",
    "witness_table",
    "ScanResult",
    "scan_injected",
]

EPR_PAIRS = tuple(permutations((1, 2, 3), 2))
# (i, j, k): mode i against the pair (j, k); one rotation per target mode
VLF_ROTATIONS = ((1, 2, 3), (2, 3, 1), (3, 1, 2))


class DegenerateInputError(ZeroDivisionError):
    """A variance used as an inference denominator is not positive."""


def _eta(params: SystemParams, a2: float, a3: float, omega, sign: int):
    g2, g3, k2 = params.gamma2, params.gamma3, params.kappa2
    w2 = np.asarray(omega, dtype=float) ** 2
    return 1.0 / (
        w2 * (g2 + g3 - sign * k2 * a3) ** 2
        + (-w2 + k2**2 * a2**2 + g2 * g3 - sign * g3 * k2 * a3) ** 2
    )


def _below_amplitudes(params: SystemParams) -> tuple[float, float]:
    if params.eps1 != 0 or np.imag(params.eps2) != 0:
        raise BranchDomainError("closed forms need eps1 = 0 and a real pump")
    ss = steady_below(params)
    return float(ss.alpha[1].real), float(ss.alpha[2].real)


def squeezing_analytic_below(params: SystemParams, omega, mode: int, quad: str):
    """Closed-form output variance of X (``quad="X"``) or Y below threshold."""
    sign = {"X": +1, "Y": -1}[quad]
    a2, a3 = _below_amplitudes(params)
    g1, g2, g3 = params.gammas
    k1, k2 = params.kappa1, params.kappa2
    w2 = np.asarray(omega, dtype=float) ** 2
    if mode == 1:
        return 1 + sign * 4 * g1 * k1 * a2 / (w2 + (g1 - sign * k1 * a2) ** 2)
    eta = _eta(params, a2, a3, omega, sign)
    if mode == 2:
        return 1 + sign * 4 * g2 * k2 * a3 * (w2 + g3**2) * eta
    if mode == 3:
        return 1 + sign * 4 * g3 * a2**2 * a3 * k2**3 * eta
    raise IndexError(f"mode must be 1, 2 or 3, got {mode}")


def covariance_analytic_below(params: SystemParams, omega, i: int, j: int, quad: str):
    """Closed-form output covariance between modes i != j below threshold."""
    if {i, j} != {2, 3}:
        if {i, j} in ({1, 2}, {1, 3}):
            return np.zeros_like(np.asarray(omega, dtype=float))
        raise IndexError(f"need two distinct modes, got ({i}, {j})")
    sign = {"X": +1, "Y": -1}[quad]
    a2, a3 = _below_amplitudes(params)
    g2, g3, k2 = params.gamma2, params.gamma3, params.kappa2
    eta = _eta(params, a2, a3, omega, sign)
    return -sign * 4 * a2 * a3 * g3 * math.sqrt(g2 * g3) * k2**2 * eta


def _moments(src, omega_index=None):
    if isinstance(src, SpectrumTable):
        VX, VY = src.VX, src.VY
    else:
        VX, VY = src
    VX, VY = np.asarray(VX), np.asarray(VY)
    if omega_index is not None:
        VX, VY = VX[omega_index], VY[omega_index]
    return VX, VY


def _inferred(V, cov, var):
    var = np.asarray(var)
    if np.any(var <= 0):
        raise DegenerateInputError("inference variance must be positive")
    return V - cov**2 / var


def reid_epr(i: int, j: int, moments) -> np.ndarray:
    """Reid product of inferred variances of mode ``i`` given mode ``j``.

    Below 1 means mode i is steered by measurements on mode j.
    """
    if i == j:
        raise ValueError("EPR needs two distinct modes")
    VX, VY = _moments(moments)
    a, b = i - 1, j - 1
    sx = _inferred(VX[..., a, a], VX[..., a, b], VX[..., b, b])
    sy = _inferred(VY[..., a, a], VY[..., a, b], VY[..., b, b])
    return sx * sy


def _combo_variance(V, a, b, c, s1, s2):
    """V(s1*Q_b + s2*Q_c) style helper: variance of Q_a + s1 Q_b + s2 Q_c."""
    return (
        V[..., a, a] + s1**2 * V[..., b, b] + s2**2 * V[..., c, c]
        + 2 * s1 * V[..., a, b] + 2 * s2 * V[..., a, c] + 2 * s1 * s2 * V[..., b, c]
    )


def vlf(i: int, j: int, k: int, moments) -> np.ndarray:
    """Combination-variance sum; vacuum gives exactly 4.

    Below 4: tripartite inseparability; below 2: genuine tripartite
    entanglement; below 1: genuine tripartite steering.
    """
    VX, VY = _moments(moments)
    a, b, c = i - 1, j - 1, k - 1
    r = 1 / math.sqrt(2)
    return _combo_variance(VX, a, b, c, -r, -r) + _combo_variance(VY, a, b, c, r, r)


def obr(i: int, j: int, k: int, sign: int, moments) -> np.ndarray:
    """Two-mode inferred variance product for mode ``i`` given ``j`` and ``k``.

    ``sign`` selects the combination ``Q_j + sign * Q_k`` for both quadratures.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    VX, VY = _moments(moments)
    a, b, c = i - 1, j - 1, k - 1
    out = None
    for V in (VX, VY):
        cov = V[..., a, b] + sign * V[..., a, c]
        var = V[..., b, b] + V[..., c, c] + 2 * sign * V[..., b, c]
        s = _inferred(V[..., a, a], cov, var)
        out = s if out is None else out * s
    return out


def obr_best(i: int, j: int, k: int, moments) -> tuple[np.ndarray, np.ndarray]:
    """Minimum of :func:`obr` over the two signs, and the sign that achieved it."""
    plus = obr(i, j, k, +1, moments)
    minus = obr(i, j, k, -1, moments)
    return np.minimum(plus, minus), np.where(minus < plus, -1, 1)


def genuine_steering_sum(moments) -> np.ndarray:
    """Sum of the three best OBR products; below 1 is genuine tripartite steering."""
    return sum(obr_best(i, j, k, moments)[0] for i, j, k in VLF_ROTATIONS)


@dataclass
class WitnessTable:
    """All witnesses on a frequency grid.

    ``epr[(i, j)]``, ``vlf[(i, j, k)]`` (divided by 4) and
    ``obr[(i, j, k)]`` are arrays over ``omegas``; rows where the spectrum
    failed are NaN and flagged in ``failed``.
    """

    omegas: np.ndarray
    squeezing: dict[str, np.ndarray]
    epr: dict[tuple[int, int], np.ndarray]
    vlf: dict[tuple[int, int, int], np.ndarray]
    obr: dict[tuple[int, int, int], np.ndarray]
    obr_sign: dict[tuple[int, int, int], np.ndarray]
    genuine_steering: np.ndarray
    failed: np.ndarray

    def minimum(self, values: np.ndarray) -> float:
        ok = ~self.failed
        return float(np.min(values[ok])) if ok.any() else math.nan

    def epr_columns(self) -> dict[str, np.ndarray]:
        cols = {"omega": self.omegas}
        for name, v in self.squeezing.items():
            cols[name] = v
        for (i, j), v in self.epr.items():
            cols[f"EPR{i}{j}"] = v
        return cols

    def tripartite_columns(self) -> dict[str, np.ndarray]:
        cols = {"omega": self.omegas}
        for (i, j, k), v in self.vlf.items():
            cols[f"S{i}{j}{k}_over_4"] = v
        for (i, j, k), v in self.obr.items():
            cols[f"OBR{i}{j}{k}"] = v
            cols[f"OBR{i}{j}{k}_sign"] = self.obr_sign[(i, j, k)]
        cols["OBR_sum"] = self.genuine_steering
        return cols


def witnesses_from_spectrum(table: SpectrumTable) -> WitnessTable:
    squeezing = {}
    for m in (1, 2, 3):
        squeezing[f"S{m}+"] = table.variance("X", m)
        squeezing[f"S{m}-"] = table.variance("Y", m)
    ok = ~table.failed
    VX = np.where(ok[:, None, None], table.VX, 1.0)
    VY = np.where(ok[:, None, None], table.VY, 1.0)
    moments = (VX, VY)

    def masked(v):
        return np.where(ok, v, np.nan)

    epr = {(i, j): masked(reid_epr(i, j, moments)) for i, j in EPR_PAIRS}
    vlf_vals = {}
    for i, j, k in VLF_ROTATIONS:
        vlf_vals[(i, j, k)] = masked(vlf(i, j, k, moments) / 4)
    obr_vals, obr_sign = {}, {}
    for rot in VLF_ROTATIONS:
        val, sgn = obr_best(*rot, moments)
        obr_vals[rot], obr_sign[rot] = masked(val), sgn
    return WitnessTable(
        omegas=table.omegas,
        squeezing=squeezing,
        epr=epr,
        vlf=vlf_vals,
        obr=obr_vals,
        obr_sign=obr_sign,
        genuine_steering=masked(genuine_steering_sum(moments)),
        failed=table.failed.copy(),
    )


def witness_table(params: SystemParams, omegas, ss: SteadyState | None = None) -> WitnessTable:
    """Witnesses at the stable steady state of ``params`` (or at ``ss``)."""
    if ss is None:
        ss = steady_state(params)
    return witnesses_from_spectrum(spectrum_table(params, ss, omegas))


@dataclass
class ScanResult:
    """Per-signal minima over frequency of each EPR product.

    ``raw[(i, j)]`` are the minima; ``capped`` clips them at 1. Points whose
    steady state could not be computed carry NaN and a message in ``errors``.
    """

    eps1: np.ndarray
    raw: dict[tuple[int, int], np.ndarray]
    capped: dict[tuple[int, int], np.ndarray]
    stable: np.ndarray
    errors: dict[int, str] = field(default_factory=dict)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"eps1": self.eps1}
        for (i, j), v in self.capped.items():
            cols[f"minEPR{i}{j}"] = v
        for (i, j), v in self.raw.items():
            cols[f"minEPR{i}{j}_raw"] = v
        cols["stable"] = self.stable.astype(int)
        return cols


def scan_injected(params: SystemParams, eps1_grid, omegas) -> ScanResult:
    """Minimum over ``omegas`` of every EPR product along a signal scan.

    ``eps1_grid`` holds signal amplitudes (complex allowed); the pump is
    taken from ``params``.
    """
    eps1_grid = np.asarray(eps1_grid)
    n = eps1_grid.size
    raw = {pair: np.full(n, np.nan) for pair in EPR_PAIRS}
    stable = np.zeros(n, dtype=bool)
    errors: dict[int, str] = {}
    for k, e1 in enumerate(eps1_grid):
        p = params.replace(eps1=complex(e1))
        try:
            ss = steady_state(p)
        except (BranchDomainError, ConvergenceError, StabilityError) as exc:
            errors[k] = str(exc)
            continue
        stable[k] = ss.stable
        if not ss.stable:
            errors[k] = "unstable steady state"
            continue
        wt = witness_table(p, omegas, ss)
        for pair in EPR_PAIRS:
            raw[pair][k] = wt.minimum(wt.epr[pair])
    capped = {pair: np.minimum(v, 1.0) for pair, v in raw.items()}
    return ScanResult(eps1_grid.real if np.isrealobj(eps1_grid) else eps1_grid, raw, capped, stable, errors)
