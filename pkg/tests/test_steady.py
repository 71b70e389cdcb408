import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_opo.equations import drift
from cascade_opo.spectra import drift_matrix
from cascade_opo.steady import (
    BranchDomainError,
    steady_above,
    steady_below,
    steady_injected,
    steady_state,
    threshold_pump,
)

from conftest import make_params


def bisect_cubic(c3, c1, eps):
    """Real root of c3 a^3 + c1 a - eps by plain bisection (monotone cubic)."""
    lo, hi = 0.0, eps / c1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if c3 * mid**3 + c1 * mid - eps > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def random_below(rng):
    g2, g3 = rng.uniform(0.1, 5.0, 2)
    k1, k2 = rng.uniform(1e-3, 0.1, 2)
    p = make_params(1.0, gamma2=g2, gamma3=g3, kappa1=k1, kappa2=k2)
    return p.replace(eps2=rng.uniform(0.01, 0.99) * threshold_pump(p))


def test_threshold_reference():
    assert threshold_pump(make_params()) == pytest.approx(150.0, abs=1e-12)
    assert threshold_pump(make_params(kappa2=0.0)) == pytest.approx(100.0, abs=1e-12)


def test_below_matches_bisection_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = random_below(rng)
        ss = steady_below(p)
        a2 = bisect_cubic(p.kappa2**2 / (2 * p.gamma3), p.gamma2, p.eps2.real)
        assert ss.alpha[1].real == pytest.approx(a2, rel=1e-9)
        assert ss.alpha[0] == 0
        assert ss.alpha[2].real == pytest.approx(-p.kappa2 * a2**2 / (2 * p.gamma3), rel=1e-9)
        assert ss.residual < 1e-10
        assert ss.stable


def test_below_reference_values(below):
    ss = steady_below(below)
    assert ss.alpha[1].real == pytest.approx(93.7721116, rel=1e-8)
    assert ss.alpha[2].real == pytest.approx(-43.9660446, rel=1e-8)


def test_below_kappa2_zero_is_linear():
    p = make_params(50.0, kappa2=0.0)
    np.testing.assert_allclose(steady_below(p).alpha, [0, 50, 0])


def test_below_complex_pump_rotates_rigidly(below):
    real = steady_below(below)
    phase = np.exp(0.7j)
    rot = steady_below(below.replace(eps2=below.eps2 * phase))
    assert rot.alpha[1] == pytest.approx(real.alpha[1] * phase, rel=1e-12)
    assert rot.alpha[2] == pytest.approx(real.alpha[2] * phase**2, rel=1e-12)
    assert rot.residual < 1e-10


@pytest.mark.parametrize("sign", [+1, -1])
def test_above_reference_values(above, sign):
    ss = steady_above(above, sign)
    np.testing.assert_allclose(ss.intensities, [15000, 10000, 2500], rtol=1e-12)
    assert np.sign(ss.alpha[0].real) == sign
    assert ss.residual < 1e-10
    assert ss.stable


def test_above_residual_random():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = random_below(rng)
        p = p.replace(eps2=rng.uniform(1.01, 3.0) * threshold_pump(p))
        ss = steady_above(p)
        assert ss.residual < 1e-10 * max(1.0, np.max(np.abs(ss.alpha)))


def test_branch_domains(below, above):
    with pytest.raises(BranchDomainError):
        steady_below(above)
    with pytest.raises(BranchDomainError):
        steady_above(below)
    with pytest.raises(BranchDomainError):
        steady_below(below.replace(eps1=1.0))


def test_stability_flips_at_threshold():
    # the zero-signal branch loses stability exactly at threshold
    for ratio in (0.5, 0.9, 0.99):
        assert steady_below(make_params(150.0 * ratio)).stable
    for ratio in (1.01, 1.5, 2.0):
        ss = steady_below(make_params(150.0 * ratio), enforce_domain=False)
        assert not ss.stable
        assert ss.eigenvalues[0].real < 0


def test_below_mode1_eigenvalues_oracle(below):
    # mode-1 block decouples: eigenvalues gamma1 -+ kappa1 |alpha2|
    ss = steady_below(below)
    k_a2 = below.kappa1 * abs(ss.alpha[1])
    A = drift_matrix(below, ss)
    block = np.linalg.eigvals(A[:2, :2])
    np.testing.assert_allclose(np.sort(block.real), [1 - k_a2, 1 + k_a2], rtol=1e-12)
    assert ss.eigenvalues[0].real == pytest.approx(1 - k_a2, rel=1e-9)


def test_characteristic_polynomial_oracle(above):
    # eigenvalues of A are roots of det(A - lambda I), evaluated by LU independently
    ss = steady_above(above)
    A = drift_matrix(above, ss)
    for lam in ss.eigenvalues:
        d = np.linalg.det(A - lam * np.eye(6))
        assert abs(d) < 1e-8 * np.linalg.norm(A) ** 6


def test_uncoupled_drift_matrix_diagonal():
    p = make_params(3.0, kappa1=0.0, kappa2=0.0)
    ss = steady_below(p)
    A = drift_matrix(p, ss)
    np.testing.assert_array_equal(A, np.diag([1, 1, 1, 1, 1, 1]))


def test_injected_fixed_point(below):
    p = below.replace(eps1=0.1 * below.eps2)
    ss = steady_injected(p)
    assert ss.branch == "injected"
    assert ss.residual < 1e-10 * max(1.0, np.max(np.abs(ss.alpha)))
    assert ss.stable
    assert abs(ss.alpha[0]) > 0
    # stationary drift evaluated independently
    assert np.max(np.abs(drift(p, ss.state.to_vector()))) < 1e-8


def test_steady_state_dispatch(below, above):
    assert steady_state(below).branch == "below"
    assert steady_state(above).branch == "above-plus"
    assert steady_state(above, -1).branch == "above-minus"
    assert steady_state(below.replace(eps1=1.0)).branch == "injected"


@settings(max_examples=40, deadline=None)
@given(ratio=st.floats(0.0, 0.999), k2=st.floats(0.0, 0.05), g2=st.floats(0.1, 10), g3=st.floats(0.1, 10))
def test_below_cubic_residual_property(ratio, k2, g2, g3):
    p = make_params(1.0, gamma2=g2, gamma3=g3, kappa2=k2)
    p = p.replace(eps2=ratio * threshold_pump(p))
    a = steady_below(p).alpha[1].real
    lhs = k2**2 / (2 * g3) * a**3 + g2 * a
    assert math.isclose(lhs, p.eps2.real, rel_tol=1e-9, abs_tol=1e-9)
