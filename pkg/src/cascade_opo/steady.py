"""Classical fixed points, the oscillation threshold and linear stability."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .classical import integrate_classical
from .equations import drift, drift_jacobian
from .model import PhaseSpaceState, SystemParams, threshold_of
from .spectra import drift_matrix

__all__ = [
    "BranchDomainError",
    "ConvergenceError",
    "StabilityError",
    "SteadyState",
    "STABILITY_TOL",
    "threshold_pump",
    "steady_below",
    "steady_above",
    "steady_injected",
    "steady_state",
    "stability",
    "residual",
]

STABILITY_TOL = 1e-9
RESIDUAL_TOL = 1e-10


class BranchDomainError(ValueError):
    """The requested branch does not exist at this pump."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3g})")
        self.best_residual = best_residual


class StabilityError(RuntimeError):
    """Eigen-decomposition of the drift matrix failed."""


@dataclass
class SteadyState:
    """A classical fixed point with its branch label and stability verdict."""

    state: PhaseSpaceState
    branch: str
    stable: bool = True
    marginal: bool = False
    residual: float = 0.0
    eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    @property
    def alpha(self) -> np.ndarray:
        return self.state.alpha

    @property
    def intensities(self) -> np.ndarray:
        return self.state.intensities.real

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "alpha": [[a.real, a.imag] for a in self.state.alpha],
            "intensities": self.intensities.tolist(),
            "eigenvalues": [[e.real, e.imag] for e in self.eigenvalues],
            "stable": self.stable,
            "marginal": self.marginal,
            "residual": self.residual,
        }


def threshold_pump(params: SystemParams) -> float:
    """Pump amplitude at which the zero solution of mode 1 destabilizes."""
    return threshold_of(params.gamma1, params.gamma2, params.gamma3, params.kappa1, params.kappa2)


def residual(params: SystemParams, state: PhaseSpaceState) -> float:
    return float(np.max(np.abs(drift(params, state.to_vector()))))


def _pump_mode_amplitude(eps: float, gamma2: float, gamma3: float, kappa2: float) -> float:
    """Real root of (kappa2^2 / 2 gamma3) a^3 + gamma2 a - eps = 0.

    Closed form, polished by Newton on the cubic: for small kappa2 the two
    closed-form terms cancel and lose digits (or underflow entirely).
    """
    if kappa2 == 0.0 or eps == 0.0:
        return eps / gamma2
    c3 = kappa2**2 / (2 * gamma3)
    with np.errstate(all="ignore"):
        root = math.sqrt(8 * gamma2**3 * gamma3**3 * kappa2**6 + 27 * eps**2 * gamma3**2 * kappa2**8)
        xi = float(np.cbrt(27 * eps * gamma3 * kappa2**4 + 3 * math.sqrt(3) * root))
        a = xi / (3 * kappa2**2) - 2 * gamma2 * gamma3 / xi if xi > 0 else math.nan
    if not (math.isfinite(a) and 0.0 <= a <= eps / gamma2):
        a = eps / gamma2
    for _ in range(4):
        step = (c3 * a**3 + gamma2 * a - eps) / (3 * c3 * a**2 + gamma2)
        a -= step
        if abs(step) <= 1e-16 * abs(a):
            break
    return a


def _finish(params: SystemParams, alpha, branch: str) -> SteadyState:
    state = PhaseSpaceState.classical(alpha)
    ss = SteadyState(state, branch, residual=residual(params, state))
    return stability(params, ss)


def steady_below(params: SystemParams, *, enforce_domain: bool = True) -> SteadyState:
    """Zero-signal fixed point (mode 1 empty).

    A complex pump rotates modes 2 and 3 rigidly. ``enforce_domain=False``
    returns this branch above threshold as well, where it is unstable.
    """
    if params.eps1 != 0:
        raise BranchDomainError("below-threshold branch requires eps1 = 0")
    eps_c = threshold_pump(params) if params.kappa1 > 0 else math.inf
    mag = abs(params.eps2)
    if enforce_domain and mag >= eps_c:
        raise BranchDomainError(f"|eps2|={mag:g} is not below threshold {eps_c:g}")
    phase = cmath.exp(1j * cmath.phase(params.eps2)) if mag else 1.0
    a2 = _pump_mode_amplitude(mag, params.gamma2, params.gamma3, params.kappa2) * phase
    a3 = -params.kappa2 * a2 * a2 / (2 * params.gamma3)
    return _finish(params, [0.0, a2, a3], "below")


def steady_above(params: SystemParams, sign: int = +1) -> SteadyState:
    """Oscillating fixed point; ``sign`` picks one of the two mode-1 phases."""
    if params.eps1 != 0:
        raise BranchDomainError("above-threshold branch requires eps1 = 0")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    eps_c = threshold_pump(params)
    mag = abs(params.eps2)
    if mag <= eps_c:
        raise BranchDomainError(f"|eps2|={mag:g} is not above threshold {eps_c:g}")
    g1, k1, k2, g3 = params.gamma1, params.kappa1, params.kappa2, params.gamma3
    phase = cmath.exp(1j * cmath.phase(params.eps2))
    a1 = sign * math.sqrt(2 * (mag - eps_c) / k1) * cmath.sqrt(phase)
    a2 = g1 / k1 * phase
    a3 = -k2 * a2 * a2 / (2 * g3)
    return _finish(params, [a1, a2, a3], "above-plus" if sign > 0 else "above-minus")


def _real_residual(params: SystemParams, x: np.ndarray) -> np.ndarray:
    a = x[:3] + 1j * x[3:]
    f = drift(params, PhaseSpaceState.classical(a).to_vector())[0::2]
    return np.concatenate([f.real, f.imag])


def _real_jacobian(params: SystemParams, x: np.ndarray) -> np.ndarray:
    a = x[:3] + 1j * x[3:]
    J = drift_jacobian(params, PhaseSpaceState.classical(a).to_vector())
    Ja, Jp = J[0::2, 0::2], J[0::2, 1::2]
    dx, dy = Ja + Jp, 1j * (Ja - Jp)
    return np.block([[dx.real, dy.real], [dx.imag, dy.imag]])


def _damped_newton(params: SystemParams, x: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float]:
    r = _real_residual(params, x)
    norm = np.max(np.abs(r))
    for _ in range(max_iter):
        if norm < tol:
            break
        try:
            step = np.linalg.solve(_real_jacobian(params, x), -r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            r_trial = _real_residual(params, trial)
            n_trial = np.max(np.abs(r_trial))
            if n_trial < norm:
                break
            lam *= 0.5
        else:
            break
        x, r, norm = trial, r_trial, n_trial
    return x, float(norm)


def steady_injected(
    params: SystemParams,
    *,
    seed_time: float = 20.0,
    dt: float = 1e-2,
    tol: float = RESIDUAL_TOL,
    max_iter: int = 100,
    max_restarts: int = 5,
) -> SteadyState:
    """Fixed point with an injected signal, by damped Newton.

    Newton is seeded by integrating the noise-free equations from vacuum
    for ``seed_time``; if it stalls, integration continues and Newton is
    retried.
    """
    state = PhaseSpaceState.vacuum()
    best = math.inf
    for _ in range(max_restarts + 1):
        traj = integrate_classical(params, state, dt, seed_time / params.gamma1, sample_every=1)
        state = traj.state_at(-1)
        x0 = np.concatenate([state.alpha.real, state.alpha.imag])
        x, norm = _damped_newton(params, x0, tol, max_iter)
        best = min(best, norm)
        if norm < tol:
            return _finish(params, x[:3] + 1j * x[3:], "injected")
    raise ConvergenceError("injected-signal fixed point not found", best)


def steady_state(params: SystemParams, sign: int = +1) -> SteadyState:
    """The stable classical fixed point appropriate to ``params``."""
    if params.eps1 != 0:
        return steady_injected(params)
    if params.kappa1 > 0 and abs(params.eps2) > threshold_pump(params):
        return steady_above(params, sign)
    return steady_below(params)


def stability(params: SystemParams, ss: SteadyState) -> SteadyState:
    """Attach eigenvalues of the drift matrix and the stability verdict."""
    A = drift_matrix(params, ss)
    if not np.all(np.isfinite(A)):
        raise StabilityError("drift matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"eigenvalue computation failed: {exc}") from exc
    lowest = float(np.min(eig.real))
    ss.eigenvalues = eig[np.argsort(eig.real)]
    ss.marginal = abs(lowest) <= STABILITY_TOL
    ss.stable = lowest > STABILITY_TOL
    return ss
