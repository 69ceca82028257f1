import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sqrtcox import PenaltySpec, penalty_value, prox, rho
from sqrtcox.penalty import threshold


def test_rho_examples():
    assert rho(PenaltySpec(1.0, 0.1), 0.0) == 0.0
    assert rho(PenaltySpec(1.0, 0.1), 1.0) == 0.5
    t = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(rho(PenaltySpec(1.0, 1.0), t), np.abs(t) / 2)
    np.testing.assert_array_equal(rho(PenaltySpec(1.0, 0.3), t), rho(PenaltySpec(1.0, 0.3), -t))


def test_rho_small_nu_limit():
    # nu below the API floor is only reachable through the formula itself
    t = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(oracles.rho(t, 1e-6), t / (1 + t), atol=1e-4)


def test_rho_strictly_increasing():
    for nu in (0.05, 0.1, 0.5, 1.0):
        v = rho(PenaltySpec(1.0, nu), np.linspace(0, 50, 2001))
        assert np.all(np.diff(v) > 0)


def test_penalty_value():
    spec = PenaltySpec(3.0, 0.1)
    assert penalty_value(spec, np.zeros(4)) == 0.0
    assert penalty_value(spec, np.array([1.0, 0, 0])) == 0.5
    a, b = np.array([0.3, -2.0]), np.array([1.5])
    assert penalty_value(spec, np.concatenate([a, b])) == pytest.approx(
        penalty_value(spec, a) + penalty_value(spec, b), abs=1e-15)


@pytest.mark.parametrize("lam, nu", [(-1.0, 0.5), (1.0, 0.0), (1.0, 0.04), (1.0, 1.5)])
def test_spec_validation(lam, nu):
    with pytest.raises(ValueError):
        PenaltySpec(lam, nu)


def test_unit_slope_at_zero():
    # rho(h)/h = 1/(1 + h**(1-nu)) approaches 1 slowly when nu is near 1
    h = 1e-40
    for nu in (0.05, 0.1, 0.5, 0.9):
        assert rho(PenaltySpec(1.0, nu), h) / h == pytest.approx(1.0, abs=1e-3)


def test_prox_examples():
    assert prox(PenaltySpec(0.0, 0.1), 1.7, 1.0) == 1.7
    assert prox(PenaltySpec(1.0, 1.0), 1.0, 1.0) == 0.5
    for z in (0.1, 0.5, 1.0, 3.0):
        for w in (0.1, 1.0):
            got = float(prox(PenaltySpec(w, 0.1), z, 1.0))
            assert got == pytest.approx(oracles.grid_prox(z, w, 0.1), abs=1e-4)


def _obj(u, z, w, nu):
    return 0.5 * (u - z) ** 2 + w * oracles.rho(u, nu)


@settings(max_examples=200, deadline=None)
@given(st.floats(-6, 6), st.floats(0.0, 3.0), st.floats(0.05, 1.0), st.floats(0.1, 2.0))
def test_prox_properties(z, lam, nu, step):
    spec = PenaltySpec(lam, nu)
    u = float(prox(spec, z, step))
    w = lam * step
    assert float(prox(spec, -z, step)) == -u
    assert abs(u) <= abs(z)
    assert u == 0 or math.copysign(1, u) == math.copysign(1, z)
    # certificate: no worse than the two trivial candidates
    assert _obj(u, z, w, nu) <= min(_obj(0.0, z, w, nu), _obj(z, z, w, nu)) + 1e-12
    if w > 1e-8 and z != 0:
        assert abs(u) < abs(z)


def test_prox_is_vectorized():
    z = np.array([-2.0, -0.01, 0.0, 0.3, 4.0])
    spec = PenaltySpec(0.7, 0.2)
    np.testing.assert_allclose(prox(spec, z, 0.5), [float(prox(spec, v, 0.5)) for v in z],
                               rtol=1e-14, atol=0)


@pytest.mark.parametrize("nu", [0.1, 0.3, 0.7])
def test_threshold_zeroes_below_and_not_above(nu):
    w = 0.8
    tau = threshold(w, nu)
    assert 0 < tau <= w
    spec = PenaltySpec(w, nu)
    assert prox(spec, tau * (1 - 1e-9), 1.0) == 0.0
    assert prox(spec, tau * (1 + 1e-6), 1.0) != 0.0
    assert threshold(w, 1.0) == pytest.approx(w / 2)
