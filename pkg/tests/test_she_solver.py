"""Mild-solution samplers."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shelab import oracles, she_solver as ss
from shelab.phi import PhiSpec, PreconditionError
from shelab.randfield import GridSpec, SheetSample, draw_increments, rng_stream
from shelab.stattest import ks_distance

G32 = GridSpec(32, 32, 6.0)


def _sheet(grid, seed=0, factor=1.0):
    return SheetSample(grid, factor * draw_increments(grid, rng_stream(seed, 0)))


def test_zero_coefficient_gives_zero():
    g = ss.physical_grid(G32, 2.0)
    assert ss.simulate_mild(PhiSpec.constant(0.0), 2.0, 0.0, G32, _sheet(g)).value == 0.0
    assert np.all(ss.mild_batch(PhiSpec.power(1.0, 0.0, 0.0), 1.0, 0.0, G32, 5, 1) == 0.0)


@given(st.floats(-10, 10))
def test_constant_coefficient_linear_bit_for_bit(c):
    sheet = _sheet(G32, 3)
    one = ss.simulate_mild(PhiSpec.constant(1.0), 1.0, 0.0, G32, sheet).value
    assert ss.simulate_mild(PhiSpec.constant(c), 1.0, 0.0, G32, sheet).value == c * one


@pytest.mark.parametrize("t", [1.0, 4.0, 16.0])
def test_discrete_variance_is_exact_for_constant(t):
    assert ss.discrete_sd(t, 0.0, G32) ** 2 == pytest.approx(math.sqrt(t / math.pi), rel=1e-8)


def test_exact_sampler_matches_path_sampler_in_law():
    phi = PhiSpec.constant(1.0)
    a = ss.linear_exact_batch(phi, 4.0, 0.0, G32, 3000, 1)
    b = ss.mild_batch(phi, 4.0, 0.0, G32, 3000, 2)
    assert ks_distance(a, b)[1] > 1e-3
    with pytest.raises(ValueError):
        ss.linear_exact_batch(PhiSpec.power(1.0), 1.0, 0.0, G32, 2, 0)


@pytest.mark.parametrize("t", [1.0, 9.0])
def test_rescaled_equals_mild_on_the_scaled_sheet(t):
    phi = PhiSpec.power(1.0, 1.0, 0.5)
    unit = _sheet(G32, 5)
    phys = SheetSample(ss.physical_grid(G32, t), t**0.75 * unit.increments)
    a = ss.simulate_rescaled(phi, t, 0.7, G32, unit).value
    b = ss.simulate_mild(phi, t, 0.7, G32, phys).value
    # far-tail cell integrals (~1e-14) lose digits to cancellation; the RMS
    # square root turns that into ~1e-7 absolute weight noise
    assert a == pytest.approx(b, abs=1e-6)


def test_mean_zero_and_variance_for_power_coefficient():
    phi = PhiSpec.power(1.0, 1.0, 1.0)
    u = ss.mild_batch(phi, 1.0, 0.0, G32, 3000, 7, integrand="subcell")
    se = u.std() / math.sqrt(len(u))
    assert abs(u.mean()) < 4 * se
    var = oracles.heat_sq_variance(phi, 1.0)
    se2 = np.std(u * u) / math.sqrt(len(u))
    assert abs(np.mean(u * u) - var) < 4 * se2


def test_batch_replicates_match_single_samples():
    phi = PhiSpec.gaussian_bump()
    b = ss.mild_batch(phi, 1.0, 0.0, G32, 3, 11, start=5)
    for k in range(3):
        s = ss.simulate_mild(phi, 1.0, 0.0, G32, rng_stream(11, 5 + k)).value
        assert b[k] == pytest.approx(s, rel=1e-12)


def test_subcell_needs_nonnegative_phi():
    with pytest.raises(PreconditionError):
        ss.mild_batch(PhiSpec.power(1.0, 1.0, -1.0), 1.0, 0.0, G32, 2, 0, integrand="subcell")
    with pytest.raises(ValueError):
        ss.mild_batch(PhiSpec.gaussian_bump(), 1.0, 0.0, G32, 2, 0, integrand="bogus")


def test_input_validation():
    with pytest.raises(ValueError):
        ss.simulate_mild(PhiSpec.constant(1.0), 0.0, 0.0, G32, rng_stream(0, 0))
    with pytest.raises(ValueError):
        ss.simulate_rescaled(PhiSpec.constant(1.0), 4.0, 0.0, GridSpec(8, 8, 6.0, 2.0),
                             rng_stream(0, 0))


def test_space_average_variance_for_constant():
    g = GridSpec(32, 32, 8.0)
    t, R = 1.0, 2.0
    u = ss.space_average_batch(PhiSpec.constant(1.0), t, R, g, 3000, 3)
    v = oracles.interval_kernel_variance(PhiSpec.constant(1.0), t, R)
    se = np.std(u * u) / math.sqrt(len(u))
    assert abs(np.mean(u * u) - v) < 4 * se
    gp = ss.physical_grid(g, t)
    from shelab.kernels import interval_kernel_weights
    k = interval_kernel_weights(gp, t, R)
    assert np.sum(k * k * gp.cell_areas) == pytest.approx(v, rel=1e-4)


def test_chaos_order_zero_and_one():
    assert np.all(ss.chaos_batch(0, 1.0, 0.0, G32, 4, 0) == 1.0)
    assert ss.chaos_term(0, 1.0, 0.0, G32, rng_stream(0, 0)).value == 1.0
    sheet = _sheet(G32, 2)
    a = ss.chaos_term(1, 1.0, 0.0, G32, sheet).value
    b = ss.simulate_mild(PhiSpec.constant(1.0), 1.0, 0.0, G32, sheet).value
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(ValueError):
        ss.chaos_term(-1, 1.0, 0.0, G32, sheet)


def test_second_chaos_variance():
    g = GridSpec(48, 48, 6.0)
    v = ss.chaos_batch(2, 1.0, 0.0, g, 2000, 4)
    se = np.std(v * v) / math.sqrt(len(v))
    assert abs(np.mean(v * v) - oracles.chaos_variance(2, 1.0)) < 4 * se + 0.02


def test_chaos_warns_when_under_resolved():
    with pytest.warns(ss.ChaosResolutionWarning):
        s = ss.chaos_term(2, 1.0, 0.0, GridSpec(8, 8, 6.0), rng_stream(0, 0))
    assert "under_resolved" in s.flags


def test_nonlinear_zero_sigma_and_constant_sigma():
    g = GridSpec(16, 16, 6.0)
    assert np.all(ss.nonlinear_batch(PhiSpec.constant(0.0), 1.0, 0.0, g, 3, 0) == 1.0)
    sheet = _sheet(ss.physical_grid(g, 1.0), 6)
    u = ss.simulate_nonlinear(PhiSpec.constant(2.0), 1.0, 0.0, g, sheet)
    w = ss.simulate_mild(PhiSpec.constant(2.0), 1.0, 0.0, g, sheet).value
    assert u == pytest.approx(1.0 + w, rel=1e-12)


def test_nonlinear_linear_sigma_has_mean_one():
    u = ss.nonlinear_batch(PhiSpec.power(1.0, 1.0, -1.0), 1.0, 0.0, GridSpec(32, 32, 6.0),
                           2000, 8)
    assert abs(u.mean() - 1.0) < 4 * u.std() / math.sqrt(len(u))


def test_nonlinear_preconditions_and_blowup():
    g = GridSpec(16, 16, 6.0)
    with pytest.raises(PreconditionError):
        ss.nonlinear_batch(PhiSpec.power(0.5), 1.0, 0.0, g, 1, 0)
    with pytest.raises(ss.BlowUpError):
        ss.nonlinear_batch(PhiSpec.power(1.0, 50.0, -50.0), 1.0, 0.0, g, 2, 0, cap=1.0)


def test_field_recursions_need_uniform_time():
    with pytest.raises(ValueError):
        ss.chaos_batch(2, 1.0, 0.0, GridSpec(8, 8, 6.0, time_grading=2.0), 1, 0)
