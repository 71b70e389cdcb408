"""Parameters, phase-space state and configuration parsing.

All rates are measured in units of the lowest-mode loss rate ``gamma1``.
A config that specifies some other ``gamma1`` is rescaled on load so that
every downstream quantity (times, frequencies) is in units of ``gamma1``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

__all__ = [
    "ConfigError",
    "SystemParams",
    "PhaseSpaceState",
    "RunSettings",
    "N_MODES",
    "alpha_row",
    "plus_row",
    "x_row",
    "y_row",
    "threshold_of",
    "parse_config",
    "load_config",
    "dump_config",
]

N_MODES = 3


class ConfigError(ValueError):
    """Raised for a missing, malformed or physically invalid config entry."""


def _as_complex(value: Any, key: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"{key}: complex values are given as [re, im]")
        return complex(_as_float(value[0], key), _as_float(value[1], key))
    if isinstance(value, Mapping):
        return complex(_as_float(value.get("re", 0.0), key), _as_float(value.get("im", 0.0), key))
    return complex(_as_float(value, key), 0.0)


def _as_float(value: Any, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        # yaml reads "1e-3" (no dot) as a string
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the three-mode cavity.

    Parameters
    ----------
    gamma1, gamma2, gamma3 : float
        Cavity loss rates of the modes at w, 2w and 4w.
    kappa1, kappa2 : float
        Down-conversion (1 <-> 2) and up-conversion (2 <-> 3) couplings.
    eps2 : complex
        Pump amplitude on mode 2.
    eps1 : complex
        Injected signal amplitude on mode 1.
    """

    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 1.0
    kappa1: float = 0.01
    kappa2: float = 0.01
    eps2: complex = 0.0
    eps1: complex = 0.0

    def __post_init__(self) -> None:
        for name in ("gamma1", "gamma2", "gamma3", "kappa1", "kappa2"):
            value = getattr(self, name)
            object.__setattr__(self, name, float(value))
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name}: must be finite")
        for name in ("eps1", "eps2"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ConfigError(f"{name}: must be finite")
            object.__setattr__(self, name, value)
        for name in ("gamma1", "gamma2", "gamma3"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"non-positive loss rate: {name}={getattr(self, name)}")
        for name in ("kappa1", "kappa2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"negative coupling: {name}={getattr(self, name)}")

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2, self.gamma3])

    def replace(self, **changes: Any) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = [value.real, value.imag] if isinstance(value, complex) else value
        return out


@dataclass(frozen=True)
class PhaseSpaceState:
    """The six positive-P variables.

    ``alpha`` and ``alpha_plus`` are independent in the doubled phase space;
    for a classical state ``alpha_plus == alpha.conj()``.
    """

    alpha: np.ndarray
    alpha_plus: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=complex).reshape(N_MODES).copy()
        ap = np.asarray(self.alpha_plus, dtype=complex).reshape(N_MODES).copy()
        a.flags.writeable = False
        ap.flags.writeable = False
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "alpha_plus", ap)

    @classmethod
    def classical(cls, alpha) -> "PhaseSpaceState":
        alpha = np.asarray(alpha, dtype=complex)
        return cls(alpha, alpha.conj())

    @classmethod
    def vacuum(cls) -> "PhaseSpaceState":
        return cls(np.zeros(N_MODES), np.zeros(N_MODES))

    @classmethod
    def from_vector(cls, v) -> "PhaseSpaceState":
        """Build from the interleaved ordering (a1, a1+, a2, a2+, a3, a3+)."""
        v = np.asarray(v, dtype=complex)
        return cls(v[0::2], v[1::2])

    def to_vector(self) -> np.ndarray:
        v = np.empty(2 * N_MODES, dtype=complex)
        v[0::2] = self.alpha
        v[1::2] = self.alpha_plus
        return v

    @property
    def intensities(self) -> np.ndarray:
        """Normally ordered photon numbers alpha_plus * alpha (complex in general)."""
        return self.alpha_plus * self.alpha

    def is_conjugate(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.alpha_plus - self.alpha.conj()) <= atol))


# Mode indexing. Modes are 1-based as in the physics; rows are 0-based.
# Fluctuation vector: mode i -> rows (2i-2, 2i-1) for (alpha, alpha_plus).
# Quadrature vector: mode i -> rows (2i-2, 2i-1) for (X, Y).


def _check_mode(i: int) -> None:
    if i not in (1, 2, 3):
        raise IndexError(f"mode index must be 1, 2 or 3, got {i}")


def alpha_row(i: int) -> int:
    _check_mode(i)
    return 2 * i - 2


def plus_row(i: int) -> int:
    _check_mode(i)
    return 2 * i - 1


x_row = alpha_row
y_row = plus_row


def threshold_of(gamma1: float, gamma2: float, gamma3: float, kappa1: float, kappa2: float) -> float:
    """Critical pump amplitude; raises when ``kappa1`` is zero."""
    if kappa1 <= 0:
        raise ConfigError("kappa1 = 0: the oscillation threshold is undefined")
    return gamma1 * gamma2 / kappa1 + gamma1**3 * kappa2**2 / (2.0 * gamma3 * kappa1**3)


@dataclass(frozen=True)
class RunSettings:
    """Numerical settings shared by the simulation and spectrum commands."""

    dt: float = 1e-3
    t_final: float = 50.0
    n_traj: int = 1000
    seed: int = 20240101
    sample_every: int = 100
    omega_max: float = 6.0
    omega_points: int = 601
    divergence_bound: float = 1e6
    discard_budget: float = 1e-3
    threads: int = 1
    initial: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    # original gamma1 before rescaling to gamma1 = 1
    time_unit: float = 1.0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be at least 1")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be at least 1")
        if self.omega_points < 1 or self.omega_max < 0:
            raise ConfigError("omega grid needs omega_points >= 1 and omega_max >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def omegas(self) -> np.ndarray:
        return np.linspace(0.0, self.omega_max, self.omega_points)

    @property
    def initial_state(self) -> PhaseSpaceState:
        return PhaseSpaceState.classical([complex(re, im) for re, im in self.initial])

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["initial"] = [list(p) for p in self.initial]
        return d


_SYSTEM_KEYS = ("gamma1", "gamma2", "gamma3", "kappa1", "kappa2", "eps2", "eps2_over_threshold", "eps1", "eps1_over_eps2")
_RUN_KEYS = tuple(f.name for f in dataclasses.fields(RunSettings))
_REQUIRED = ("gamma1", "gamma2", "gamma3", "kappa1", "kappa2")


def parse_config(doc: Mapping[str, Any] | str) -> tuple[SystemParams, RunSettings]:
    """Validate a config document into ``(SystemParams, RunSettings)``.

    The document is either flat or split into ``system`` and ``run``
    sections. The pump is given as ``eps2`` (number or ``[re, im]``) or as
    ``eps2_over_threshold``; the signal as ``eps1`` or ``eps1_over_eps2``.
    Strings are parsed as YAML (JSON is a subset).
    """
    if isinstance(doc, str):
        doc = yaml.safe_load(doc) or {}
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a mapping")

    flat: dict[str, Any] = {}
    for key, value in doc.items():
        if key in ("system", "run"):
            if not isinstance(value, Mapping):
                raise ConfigError(f"section {key!r} must be a mapping")
            flat.update(value)
        else:
            flat[key] = value
    unknown = set(flat) - set(_SYSTEM_KEYS) - set(_RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    for key in _REQUIRED:
        if key not in flat:
            raise ConfigError(f"missing key: {key}")
    if ("eps2" in flat) == ("eps2_over_threshold" in flat):
        raise ConfigError("give exactly one of eps2 or eps2_over_threshold")
    if "eps1" in flat and "eps1_over_eps2" in flat:
        raise ConfigError("give at most one of eps1 or eps1_over_eps2")

    rates = {k: _as_float(flat[k], k) for k in _REQUIRED}
    for k in ("gamma1", "gamma2", "gamma3"):
        if rates[k] <= 0:
            raise ConfigError(f"non-positive loss rate: {k}={rates[k]}")
    scale = rates["gamma1"]

    if "eps2_over_threshold" in flat:
        ratio = _as_float(flat["eps2_over_threshold"], "eps2_over_threshold")
        eps2 = complex(ratio * threshold_of(**rates))
    else:
        eps2 = _as_complex(flat["eps2"], "eps2")
    if "eps1_over_eps2" in flat:
        eps1 = _as_complex(flat["eps1_over_eps2"], "eps1_over_eps2") * eps2
    else:
        eps1 = _as_complex(flat.get("eps1", 0.0), "eps1")

    if scale == 1.0:
        params = SystemParams(eps2=eps2, eps1=eps1, **rates)
    else:
        params = SystemParams(
            gamma1=1.0,
            gamma2=rates["gamma2"] / scale,
            gamma3=rates["gamma3"] / scale,
            kappa1=rates["kappa1"] / scale,
            kappa2=rates["kappa2"] / scale,
            eps2=eps2 / scale,
            eps1=eps1 / scale,
        )

    run_kwargs: dict[str, Any] = {}
    for key in _RUN_KEYS:
        if key not in flat or key == "time_unit":
            continue
        value = flat[key]
        if key in ("n_traj", "seed", "sample_every", "omega_points", "threads"):
            number = _as_float(value, key)
            if number != int(number):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            run_kwargs[key] = int(number)
        elif key == "initial":
            if not isinstance(value, (list, tuple)) or len(value) != N_MODES:
                raise ConfigError("initial: expected three amplitudes")
            run_kwargs[key] = tuple(
                (c.real, c.imag) for c in (_as_complex(v, "initial") for v in value)
            )
        else:
            run_kwargs[key] = _as_float(value, key)
    run_kwargs["time_unit"] = scale
    return params, RunSettings(**run_kwargs)


def load_config(path: str | Path) -> tuple[SystemParams, RunSettings]:
    return parse_config(Path(path).read_text())


def dump_config(params: SystemParams, settings: RunSettings | None = None) -> str:
    """Serialize to YAML that :func:`parse_config` reads back exactly."""
    doc: dict[str, Any] = {"system": params.to_dict()}
    if settings is not None:
        run = settings.to_dict()
        run.pop("time_unit")
        doc["run"] = run
    return yaml.safe_dump(doc, sort_keys=False)
