"""Reference parameter sets for the standard figures, keyed by figure number."""

from __future__ import annotations

_BASE = {"gamma1": 1.0, "gamma2": 1.0, "gamma3": 1.0, "kappa1": 0.01, "kappa2": 0.01}

FIGURES: dict[int, dict] = {
    1: {
        "name": "intensities",
        "kind": "simulate",
        "config": {**_BASE, "eps2_over_threshold": 1.5, "n_traj": 10000, "t_final": 50.0, "dt": 1e-3,
                   "sample_every": 100},
    },
    2: {
        "name": "self-pulsing",
        "kind": "selfpulse",
        "config": {**_BASE, "eps2_over_threshold": 5.0, "n_traj": 10000, "t_final": 50.0, "dt": 1e-3,
                   "sample_every": 10, "initial": [0.0, [1.0, 2.0], [1.0, -2.0]]},
    },
    3: {"name": "squeezing-below", "kind": "spectra", "config": {**_BASE, "eps2_over_threshold": 0.9}},
    4: {"name": "squeezing-above", "kind": "spectra", "config": {**_BASE, "eps2_over_threshold": 1.5}},
    5: {"name": "epr-below", "kind": "epr", "config": {**_BASE, "eps2_over_threshold": 0.9}},
    6: {"name": "epr-above", "kind": "epr", "config": {**_BASE, "eps2_over_threshold": 1.5}},
    7: {"name": "epr-small-gamma2", "kind": "epr", "config": {**_BASE, "gamma2": 0.1, "eps2_over_threshold": 1.5}},
    8: {"name": "epr-kappa-ratio", "kind": "epr", "config": {**_BASE, "kappa2": 0.015, "eps2_over_threshold": 1.5}},
    9: {"name": "tripartite", "kind": "tripartite", "config": {**_BASE, "eps2_over_threshold": 1.5}},
    10: {
        "name": "inject-scan",
        "kind": "scan-inject",
        "config": {**_BASE, "eps2_over_threshold": 0.9},
        "options": {"eps1_max_over_eps2": 0.2, "eps1_points": 41},
    },
    11: {"name": "epr-inject", "kind": "epr", "config": {**_BASE, "eps2_over_threshold": 0.9, "eps1_over_eps2": 0.1}},
}

ALIASES = {entry["name"]: n for n, entry in FIGURES.items()}


def lookup(key: str | int) -> tuple[int, dict]:
    """Figure preset by number or name."""
    if isinstance(key, str) and not key.isdigit():
        if key not in ALIASES:
            raise KeyError(f"unknown figure {key!r}; choose from {sorted(ALIASES)} or 1-{len(FIGURES)}")
        key = ALIASES[key]
    n = int(key)
    if n not in FIGURES:
        raise KeyError(f"unknown figure {n}; choose 1-{len(FIGURES)}")
    return n, FIGURES[n]
