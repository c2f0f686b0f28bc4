"""Coefficient functions."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from shelab.phi import PhiSpec, PreconditionError, one_minus_bump, parse_phi

PHIS = [PhiSpec.constant(2.0), PhiSpec.power(1.0, 1.0, 0.5), PhiSpec.power(0.0, 1.0, 1.0),
        PhiSpec.gaussian_bump(1.5), PhiSpec.indicator(-0.5, 1.0), one_minus_bump()]


def test_power_values_and_zero_convention():
    phi = PhiSpec.power(1.0, 2.0, 3.0)
    np.testing.assert_allclose(phi([-2.0, 0.0, 1.5]), [6.0, 0.0, 3.0])
    assert float(PhiSpec.power(0.0, 1.0, 3.0)(0.0)) == 2.0
    with pytest.raises(ValueError):
        PhiSpec.power(-1.0)


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("var", [0.0, 0.3, 2.0])
def test_smoothed_square_against_quadrature(phi, var):
    z = 0.4
    if var == 0:
        expected = float(phi(z)) ** 2
    else:
        f = lambda w: float(phi(z + w)) ** 2 * math.exp(-w * w / (2 * var)) / math.sqrt(
            2 * math.pi * var)
        expected = integrate.quad(f, -12 * math.sqrt(var), 12 * math.sqrt(var), limit=400,
                                  points=[-0.9, 0.6, -0.4])[0]
    # Gauss-Hermite on kinked coefficients is accurate to a few 1e-4
    rel = 1e-3 if phi.kind == "table" else 1e-6
    assert float(phi.smoothed_square(z, var)) == pytest.approx(expected, rel=rel, abs=1e-9)


@given(st.floats(0.0, 3.0), st.floats(0.01, 5.0))
def test_power_second_moment_closed_form(alpha, var):
    phi = PhiSpec.power(alpha, 1.0, 2.0)
    f = lambda w: float(phi(w)) ** 2 * math.exp(-w * w / (2 * var)) / math.sqrt(2 * math.pi * var)
    sd = math.sqrt(var)
    q = integrate.quad(f, -15 * sd, 0)[0] + integrate.quad(f, 0, 15 * sd)[0]
    assert float(phi.second_moment(var)) == pytest.approx(q, rel=1e-6)


def test_l2_norms():
    assert PhiSpec.gaussian_bump().l2_norm_sq == pytest.approx(math.sqrt(math.pi))
    assert PhiSpec.indicator(0, 2, 3).l2_norm_sq == pytest.approx(18.0)
    x = np.linspace(-3, 3, 61)
    tab = PhiSpec.table(x, np.maximum(0, 1 - np.abs(x)))
    assert tab.l2_norm_sq == pytest.approx(2 / 3)
    assert PhiSpec.constant(0).is_zero and PhiSpec.power(1, 0, 0).is_zero
    with pytest.raises(PreconditionError):
        PhiSpec.constant(1).require_l2()
    with pytest.raises(PreconditionError):
        one_minus_bump().require_l2()


@given(st.floats(-4, 4))
def test_scaled_is_pointwise(k):
    for phi in PHIS:
        np.testing.assert_allclose(phi.scaled(k)([-1.3, 0.2, 2.0]), k * phi([-1.3, 0.2, 2.0]),
                                   atol=1e-14)


def test_lipschitz_constants():
    assert PhiSpec.constant(3).lipschitz_constant() == 0
    assert PhiSpec.power(1, 2, -3).lipschitz_constant() == 3
    assert PhiSpec.power(0.5).lipschitz_constant() == math.inf
    assert PhiSpec.gaussian_bump().lipschitz_constant() == pytest.approx(math.exp(-0.5))


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
def test_dict_roundtrip(phi):
    back = PhiSpec.from_dict(phi.as_dict())
    np.testing.assert_array_equal(back([-2.0, 0.0, 0.7]), phi([-2.0, 0.0, 0.7]))
    assert back.label() == phi.label()


def test_parse_phi():
    assert parse_phi("constant:1").params == (1.0,)
    assert parse_phi("power:1,1,1").params == (1.0, 1.0, 1.0)
    assert parse_phi("gaussian_bump").kind == "gaussian_bump"
    assert parse_phi("indicator:0,1").params[:2] == (0.0, 1.0)
    with pytest.raises(ValueError):
        parse_phi("nonsense")


def test_table_validation():
    with pytest.raises(ValueError):
        PhiSpec.table([0, 0], [1, 2])
    with pytest.raises(ValueError):
        PhiSpec.indicator(1, 0)
