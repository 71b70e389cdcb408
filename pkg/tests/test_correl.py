import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_opo.correl import (
    EPR_PAIRS,
    VLF_ROTATIONS,
    DegenerateInputError,
    genuine_steering_sum,
    obr,
    obr_best,
    reid_epr,
    scan_injected,
    vlf,
    witness_table,
)


EYE = np.eye(3)


def test_vacuum_witness_values():
    moments = (EYE, EYE)
    for i, j in EPR_PAIRS:
        assert reid_epr(i, j, moments) == 1.0
    for rot in VLF_ROTATIONS:
        assert vlf(*rot, moments) == pytest.approx(4.0)
        # inferring from the sum of two vacuum modes gains nothing
        assert obr(*rot, +1, moments) == 1.0
    assert genuine_steering_sum(moments) == pytest.approx(3.0)


def test_uncorrelated_epr_is_own_uncertainty_product():
    VX, VY = np.diag([3.0, 0.5, 2.0]), np.diag([0.4, 2.5, 0.6])
    for i, j in EPR_PAIRS:
        assert reid_epr(i, j, (VX, VY)) == pytest.approx(VX[i - 1, i - 1] * VY[i - 1, i - 1])
        k = 6 - i - j
        assert obr(i, j, k, -1, (VX, VY)) == pytest.approx(VX[i - 1, i - 1] * VY[i - 1, i - 1])


def test_epr_handbuilt_two_mode_squeezed_state():
    # ideal two-mode squeezing: V = cosh 2r, C = +-sinh 2r; inferred product = 1 / cosh^2 2r
    r = 0.6
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    VX = np.array([[c, s, 0], [s, c, 0], [0, 0, 1.0]])
    VY = np.array([[c, -s, 0], [-s, c, 0], [0, 0, 1.0]])
    expected = (c - s**2 / c) ** 2
    assert reid_epr(1, 2, (VX, VY)) == pytest.approx(expected)
    assert reid_epr(2, 1, (VX, VY)) == pytest.approx(expected)
    assert reid_epr(1, 3, (VX, VY)) == pytest.approx(c * c)


def test_vlf_explicit_combination():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    VX = M @ M.T + np.eye(3)
    VY = np.linalg.inv(VX) * 2 + np.eye(3)
    r = 1 / np.sqrt(2)
    for i, j, k in VLF_ROTATIONS:
        u = np.zeros(3)
        u[i - 1], u[j - 1], u[k - 1] = 1, -r, -r
        w = np.zeros(3)
        w[i - 1], w[j - 1], w[k - 1] = 1, r, r
        assert vlf(i, j, k, (VX, VY)) == pytest.approx(u @ VX @ u + w @ VY @ w)


def test_obr_is_optimal_linear_inference_for_equal_weights():
    # OBR inferred variance equals the residual of regressing Q_i on Q_j + s Q_k
    rng = np.random.default_rng(1)
    M = rng.normal(size=(3, 3))
    V = M @ M.T + np.eye(3)
    for s in (+1, -1):
        g = np.array([0, 1, s])
        cov = V[0] @ g
        var = g @ V @ g
        assert obr(1, 2, 3, s, (V, V)) == pytest.approx((V[0, 0] - cov**2 / var) ** 2)
    best, sign = obr_best(1, 2, 3, (V, V))
    assert best == min(obr(1, 2, 3, +1, (V, V)), obr(1, 2, 3, -1, (V, V)))
    assert obr(1, 2, 3, int(sign), (V, V)) == best


def test_degenerate_input_raises():
    VX = np.diag([1.0, 0.0, 1.0])
    with pytest.raises(DegenerateInputError):
        reid_epr(1, 2, (VX, EYE))
    with pytest.raises(ValueError):
        reid_epr(2, 2, (EYE, EYE))
    with pytest.raises(ValueError):
        obr(1, 2, 3, 0, (EYE, EYE))


_perm = list(itertools.permutations(range(3)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.sampled_from(_perm))
def test_permutation_covariance_property(seed, perm):
    # relabelling the modes relabels every witness
    rng = np.random.default_rng(seed)
    MX, MY = rng.normal(size=(2, 3, 3))
    VX, VY = MX @ MX.T + 0.1 * EYE, MY @ MY.T + 0.1 * EYE
    P = np.eye(3)[list(perm)]
    VXp, VYp = P @ VX @ P.T, P @ VY @ P.T
    inv = {old + 1: new + 1 for new, old in enumerate(perm)}
    for i, j in EPR_PAIRS:
        assert reid_epr(inv[i], inv[j], (VXp, VYp)) == pytest.approx(reid_epr(i, j, (VX, VY)), rel=1e-10)
    for i, j, k in VLF_ROTATIONS:
        # vLF is symmetric in its last two modes
        assert vlf(i, j, k, (VX, VY)) == pytest.approx(vlf(i, k, j, (VX, VY)), rel=1e-12)
        assert vlf(inv[i], inv[j], inv[k], (VXp, VYp)) == pytest.approx(vlf(i, j, k, (VX, VY)), rel=1e-10)


def test_below_threshold_structure(below, omegas):
    wt = witness_table(below, omegas)
    np.testing.assert_allclose(wt.epr[(2, 3)], wt.epr[(3, 2)], rtol=1e-8)
    np.testing.assert_allclose(wt.epr[(2, 1)], wt.epr[(3, 1)], rtol=1e-8)
    assert wt.minimum(wt.epr[(2, 3)]) < 1
    assert all(wt.minimum(v) >= 1 for v in wt.vlf.values())


def test_branch_sign_is_local_relabelling(above, omegas):
    # the two oscillating branches differ by Q1 -> -Q1; EPR and the sign-optimised
    # OBR are blind to that, vLF sees it as a reflection of mode 1
    from cascade_opo.spectra import spectrum_table
    from cascade_opo.steady import steady_above

    plus_t = spectrum_table(above, steady_above(above, +1), omegas)
    minus_t = spectrum_table(above, steady_above(above, -1), omegas)
    R = np.diag([-1.0, 1.0, 1.0])
    np.testing.assert_allclose(minus_t.VX, R @ plus_t.VX @ R, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(minus_t.VY, R @ plus_t.VY @ R, rtol=1e-9, atol=1e-9)
    plus = witness_table(above, omegas, steady_above(above, +1))
    minus = witness_table(above, omegas, steady_above(above, -1))
    for key in plus.epr:
        np.testing.assert_allclose(plus.epr[key], minus.epr[key], rtol=1e-9)
    for key in plus.obr:
        np.testing.assert_allclose(plus.obr[key], minus.obr[key], rtol=1e-9)


def test_witness_columns(above, omegas):
    wt = witness_table(above, omegas)
    cols = wt.epr_columns()
    assert list(cols)[:7] == ["omega", "S1+", "S1-", "S2+", "S2-", "S3+", "S3-"]
    assert {f"EPR{i}{j}" for i, j in EPR_PAIRS} <= set(cols)
    tri = wt.tripartite_columns()
    assert "S312_over_4" in tri and "OBR312_sign" in tri and "OBR_sum" in tri
    assert all(len(v) == omegas.size for v in tri.values())


def test_scan_caps_and_zero_signal(below):
    omegas = np.linspace(0, 6, 61)
    grid = np.array([0.0, 0.05, 0.1]) * below.eps2.real
    res = scan_injected(below, grid, omegas)
    plain = witness_table(below, omegas)
    for pair in EPR_PAIRS:
        assert np.all(res.capped[pair] <= 1.0)
        np.testing.assert_array_equal(res.capped[pair], np.minimum(res.raw[pair], 1.0))
        # the zero-signal point equals the unseeded witness minima
        assert res.raw[pair][0] == pytest.approx(plain.minimum(plain.epr[pair]), rel=1e-10)
    assert res.stable.all() and not res.errors
    assert res.columns()["eps1"][1] == grid[1]


def test_injected_signal_steers_mode3_from_mode1_only_one_way(below):
    # with a seed at a tenth of the pump, mode 1 steers mode 3 (at low frequency)
    # while mode 3 never steers mode 1
    p = below.replace(eps1=0.1 * below.eps2)
    wt = witness_table(p, np.linspace(0, 6, 601))
    assert wt.minimum(wt.epr[(3, 1)]) < 1
    assert wt.minimum(wt.epr[(1, 3)]) >= 1
    assert np.all(wt.epr[(3, 1)][wt.omegas <= 0.5] < 1)
