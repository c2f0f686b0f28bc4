"""Grid estimators of the weighted local time and the quadratic variation."""

import math

import numpy as np
import pytest

from shelab import local_time as lt, oracles
from shelab.phi import PhiSpec, PreconditionError
from shelab.randfield import GridSpec, sample_sheet

G = GridSpec(48, 48, 6.0)
EL = lt.expected_local_time(1.0)


def test_floor_weights_sum_to_expected_local_time():
    assert lt.occupation_weights(G, 0.0).sum() == pytest.approx(EL, rel=1e-6)


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_smoothed_weights_sum_to_oracle(eps):
    assert lt.occupation_weights(G, eps).sum() == pytest.approx(
        lt.expected_smoothed_local_time(eps), rel=1e-6)


def test_partial_range_weights():
    assert lt.occupation_weights(G, 0.0, 0.5).sum() == pytest.approx(
        lt.expected_local_time(0.5), rel=1e-6)


def test_estimators_are_unbiased():
    L = lt.local_time_batch(G, [0.0, 0.1], 1500, 3)
    se = L.std(axis=0, ddof=1) / math.sqrt(len(L))
    assert abs(L[:, 0].mean() - EL) < 4 * se[0]
    assert abs(L[:, 1].mean() - lt.expected_smoothed_local_time(0.1)) < 4 * se[1]
    assert np.all(L >= 0)


def test_monotone_in_r_and_zero_at_origin():
    s = sample_sheet(G, 2, namespace=2)
    vals = [lt.floor_local_time(s, r) for r in (0.0, 0.25, 0.5, 1.0)]
    assert vals[0] == 0.0
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert lt.weighted_local_time(s, 0.1, 0.0).value == 0.0


def test_batch_matches_single_sheet_estimators():
    L = lt.local_time_batch(G, [0.0, 0.2], 2, 9, start=4)
    s = sample_sheet(G, np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(9, spawn_key=(2, 5)))))
    assert L[1, 0] == pytest.approx(lt.floor_local_time(s), rel=1e-12)
    assert L[1, 1] == pytest.approx(lt.weighted_local_time(s, 0.2).value, rel=1e-12)


def test_weights_scale_and_window():
    w1 = lt.occupation_weights(G, 0.0, 1.0, ("point",))
    w2 = lt.occupation_weights(G, 0.0, 1.0, ("point", 2.0))
    np.testing.assert_allclose(w2, 2 * w1)
    w3 = lt.occupation_weights(G, 0.0, 1.0, ("point", 1.0, 1.0))
    mask = lt.window_mask(G, 1.0)
    np.testing.assert_allclose(w3, w1 * mask)
    with pytest.raises(ValueError):
        lt.window_mask(G, 1.01)


def test_interval_weights_sum_to_oracle():
    ind = PhiSpec.indicator(0.0, 1.0)
    w = lt.occupation_weights(G, 0.0, 1.0, ("interval", 1.0))
    assert w.sum() == pytest.approx(oracles.thm32_variance("i", ind, 1.0), rel=1e-4)


def test_input_validation():
    s = sample_sheet(G, 0)
    with pytest.raises(ValueError):
        lt.weighted_local_time(s, 0.0)
    with pytest.raises(ValueError):
        lt.floor_local_time(s, 1.5)
    with pytest.raises(ValueError):
        lt.local_time_batch(GridSpec(4, 4, 1.0, horizon=2.0), [0.0], 1, 0)
    with pytest.raises(ValueError):
        lt.occupation_weights(G, 0.0, 1.0, ("bogus",))


def test_grid_floor_epsilon():
    g = GridSpec(512, 512, 6.0)
    assert lt.grid_floor_epsilon(g) == pytest.approx(2 * math.sqrt(6 / 512**2 / 2))


def test_quadratic_variation_mean_matches_variance_oracle():
    phi, t = PhiSpec.gaussian_bump(), 100.0
    qv, L = lt.qv_batch(phi, [t], G, 800, 5)
    target = t**0.25 * oracles.heat_sq_variance(phi, t)
    se = qv[:, 0].std(ddof=1) / math.sqrt(len(qv))
    assert abs(qv[:, 0].mean() - target) < 4 * se


def test_quadratic_variation_tracks_local_time():
    phi = PhiSpec.gaussian_bump()
    qv, L = lt.qv_batch(phi, [1e2, 1e4], G, 300, 6)
    n2 = phi.l2_norm_sq
    gaps = [np.mean((qv[:, k] - n2 * L) ** 2) for k in range(2)]
    assert gaps[1] < gaps[0]
    assert np.corrcoef(qv[:, 1], L)[0, 1] > 0.9


def test_quadratic_variation_single_sheet_and_preconditions():
    phi = PhiSpec.gaussian_bump()
    s = sample_sheet(G, 7)
    q = lt.quadratic_variation(s, phi, 10.0, integrand="subcell")
    assert q.value > 0
    assert lt.quadratic_variation(s, phi, 10.0, r=0.0).value == 0.0
    with pytest.raises(PreconditionError):
        lt.quadratic_variation(s, PhiSpec.constant(1.0), 10.0)
