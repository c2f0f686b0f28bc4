"""Statistical checks."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from shelab.stattest import (DEFAULT_LAMBDAS, McBatch, ecf, ks_distance, moment_report,
                             rate_fit, stable_test)

samples = arrays(float, st.integers(2, 60), elements=st.floats(-1e3, 1e3))
lams = arrays(float, st.integers(1, 8), elements=st.floats(-20, 20))


@given(samples, lams)
def test_ecf_bounded_hermitian_and_one_at_zero(v, lam):
    z = ecf(v, lam)
    assert np.all(np.abs(z) <= 1.0)
    np.testing.assert_array_equal(ecf(v, -lam), np.conj(z))
    assert ecf(v, [0.0])[0] == 1.0


@given(st.floats(-50, 50), lams)
def test_ecf_of_point_mass(c, lam):
    np.testing.assert_allclose(ecf([c, c], lam), np.exp(1j * lam * c), atol=1e-12)


def test_ecf_of_gaussian_batch():
    x = np.random.default_rng(0).standard_normal(20_000)
    np.testing.assert_allclose(ecf(McBatch(x), DEFAULT_LAMBDAS),
                               np.exp(-DEFAULT_LAMBDAS**2 / 2), atol=4 / math.sqrt(x.size))


def test_batch_summary():
    b = McBatch([1.0, 2.0, 3.0, 4.0], label="x", seed=3)
    assert b.n == 4 and b.mean == 2.5
    assert b.variance == pytest.approx(5 / 3)
    assert b.stderr == pytest.approx(math.sqrt(5 / 12))
    json.dumps(b.summary())
    with pytest.raises(ValueError):
        b.values[0] = 0.0
    with pytest.raises(ValueError):
        McBatch([1.0])


def test_ks_identical_and_separated():
    x = np.random.default_rng(1).standard_normal(500)
    assert ks_distance(x, x) == (0.0, 1.0)
    d, p = ks_distance(x, 2 * np.random.default_rng(2).standard_normal(4000))
    assert d > 0.1 and p < 1e-10


def test_ks_pvalues_are_calibrated_under_the_null():
    rng = np.random.default_rng(3)
    ps = [ks_distance(rng.standard_normal(300), rng.standard_normal(300))[1] for _ in range(400)]
    assert 0.02 < np.mean(np.array(ps) < 0.05) < 0.09


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_rate_fit_recovers_exact_power_laws(b, a):
    t = np.array([1.0, 4.0, 16.0, 64.0])
    fit = rate_fit(list(zip(t, a * t**b)))
    assert fit.exponent == pytest.approx(b, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(math.log(a), abs=1e-9)


def test_rate_fit_validation():
    with pytest.raises(ValueError):
        rate_fit([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        rate_fit([(1, 1), (1, 2), (3, 3)])
    with pytest.raises(ValueError):
        rate_fit([(1, 1), (2, -2), (3, 3)])
    json.dumps(rate_fit([(1, 1), (2, 2), (4, 3)]).to_dict())


def test_stable_test_accepts_independent_and_rejects_dependent():
    rng = np.random.default_rng(4)
    n = 4000
    h = rng.standard_normal(n)            # information in G
    f = rng.standard_normal(n)            # independent of h
    lim = rng.standard_normal(n)
    rep = stable_test(np.exp(1j * h), f, lim, seed=1)
    assert rep.passed
    dep = stable_test(np.exp(1j * f), f, lim, seed=1)
    assert not dep.passed
    assert dep.max_abs_gap > 3 * dep.mc_error_bound
    json.dumps(rep.to_dict())


def test_stable_test_validation():
    with pytest.raises(ValueError):
        stable_test(np.ones(3), np.ones(4), np.ones(3))
    with pytest.raises(ValueError):
        stable_test(2 * np.ones(3), np.ones(3), np.ones(3))


def test_moment_report():
    x = np.random.default_rng(5).standard_normal(50_000)
    rep = moment_report(McBatch(x), [(2, 1.0, 4), (4, 3.0, 4), (2, 1.2, 4)])
    assert [r["passed"] for r in rep] == [True, True, False]
    with pytest.raises(ValueError):
        moment_report(McBatch(x), [(5, 0.0, 3)])
