import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_opo.model import (
    ConfigError,
    PhaseSpaceState,
    RunSettings,
    SystemParams,
    alpha_row,
    dump_config,
    load_config,
    parse_config,
    plus_row,
    threshold_of,
)

from conftest import BASE


def test_threshold_of_reference_values():
    assert threshold_of(1, 1, 1, 0.01, 0.01) == pytest.approx(150.0, abs=1e-12)
    assert threshold_of(1, 1, 1, 0.01, 0.0) == pytest.approx(100.0, abs=1e-12)


def test_threshold_requires_down_conversion():
    with pytest.raises(ConfigError):
        threshold_of(1, 1, 1, 0.0, 0.01)


def test_over_threshold_resolves_pump():
    params, _ = parse_config({**BASE, "eps2_over_threshold": 1.5})
    assert params.eps2 == pytest.approx(225.0)
    assert params.eps1 == 0


def test_sections_and_flat_are_equivalent():
    flat = parse_config({**BASE, "eps2": 100.0, "dt": 2e-3})
    nested = parse_config({"system": {**BASE, "eps2": 100.0}, "run": {"dt": 2e-3}})
    assert flat == nested


def test_yaml_text_and_string_numbers():
    text = """
system:
  gamma1: 1
  gamma2: 1
  gamma3: 1
  kappa1: 1e-2
  kappa2: 1e-2
  eps2: [100, 5]
  eps1_over_eps2: 0.1
run:
  dt: 1e-3
  n_traj: 500
"""
    params, run = parse_config(text)
    assert params.kappa1 == 0.01
    assert params.eps2 == 100 + 5j
    assert params.eps1 == pytest.approx(10 + 0.5j)
    assert run.dt == 1e-3 and run.n_traj == 500


@pytest.mark.parametrize(
    "doc",
    [
        {**BASE},  # no pump
        {**BASE, "eps2": 1.0, "eps2_over_threshold": 0.5},
        {**BASE, "eps2": 1.0, "eps1": 0.1, "eps1_over_eps2": 0.1},
        {**BASE, "eps2": 1.0, "gamma2": 0.0},
        {**BASE, "eps2": 1.0, "kappa2": -0.01},
        {**BASE, "eps2": 1.0, "bogus": 3},
        {**BASE, "eps2": 1.0, "n_traj": 2.5},
        {**BASE, "eps2": 1.0, "dt": -1},
        {**BASE, "eps2": "lots"},
        {k: v for k, v in BASE.items() if k != "gamma3"} | {"eps2": 1.0},
    ],
)
def test_invalid_configs_rejected(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_gamma1_rescaling():
    params, run = parse_config({"gamma1": 2.0, "gamma2": 4.0, "gamma3": 2.0, "kappa1": 0.02,
                                "kappa2": 0.02, "eps2": 300.0})
    assert params.gamma1 == 1.0
    assert params.gamma2 == 2.0
    assert params.kappa1 == pytest.approx(0.01)
    assert params.eps2 == pytest.approx(150.0)
    assert run.time_unit == 2.0


def test_row_indexing():
    assert [alpha_row(i) for i in (1, 2, 3)] == [0, 2, 4]
    assert [plus_row(i) for i in (1, 2, 3)] == [1, 3, 5]
    with pytest.raises(IndexError):
        alpha_row(4)
    with pytest.raises(IndexError):
        plus_row(0)


def test_phase_space_state_roundtrip():
    s = PhaseSpaceState.classical([1 + 2j, 3.0, -1j])
    v = s.to_vector()
    assert v[1] == 1 - 2j and v[5] == 1j
    np.testing.assert_array_equal(PhaseSpaceState.from_vector(v).to_vector(), v)
    assert s.is_conjugate()
    np.testing.assert_allclose(s.intensities, [5, 9, 1])
    with pytest.raises(ValueError):
        s.alpha[0] = 0


def test_vacuum_is_zero():
    v = PhaseSpaceState.vacuum().to_vector()
    assert not np.any(v)


def test_config_file_roundtrip(tmp_path):
    params = SystemParams(**BASE, eps2=120 + 3j, eps1=0.5)
    run = RunSettings(dt=2e-3, n_traj=40, initial=((0.0, 0.0), (1.0, 2.0), (1.0, -2.0)))
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(params, run))
    p2, r2 = load_config(path)
    assert p2 == params
    assert r2 == run


_rate = st.floats(0.05, 20, allow_nan=False)
_coupling = st.floats(0.0, 1.0, allow_nan=False)
_amp = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(g2=_rate, g3=_rate, k1=st.floats(1e-4, 1.0), k2=_coupling, re=_amp, im=_amp, e1=_amp)
def test_dump_parse_roundtrip_property(g2, g3, k1, k2, re, im, e1):
    params = SystemParams(gamma1=1.0, gamma2=g2, gamma3=g3, kappa1=k1, kappa2=k2,
                          eps2=complex(re, im), eps1=complex(e1, 0))
    p2, _ = parse_config(dump_config(params))
    assert p2 == params


@settings(max_examples=60, deadline=None)
@given(g1=_rate, g2=_rate, g3=_rate, k1=st.floats(1e-4, 1.0), k2=_coupling)
def test_threshold_scaling_property(g1, g2, g3, k1, k2):
    # rescaling every rate by gamma1 rescales the threshold by gamma1
    full = threshold_of(g1, g2, g3, k1, k2)
    unit = threshold_of(1.0, g2 / g1, g3 / g1, k1 / g1, k2 / g1)
    assert math.isclose(full, g1 * unit, rel_tol=1e-12)
