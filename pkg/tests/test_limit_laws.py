"""Samplers of the large-time limit laws."""

import math

import numpy as np
import pytest

from shelab import limit_laws as ll
from shelab.phi import PhiSpec, PreconditionError
from shelab.randfield import GridSpec, SheetSample, draw_increments, rng_stream

G = GridSpec(32, 30, 6.0)  # +-1 is a space edge
BUMP = PhiSpec.gaussian_bump()


def _sheet(seed):
    return SheetSample(G, draw_increments(G, rng_stream(seed, 0)))


def _within(x, target, k=4.0, bias=0.0):
    se = np.std(x, ddof=1) / math.sqrt(len(x))
    return abs(np.mean(x) - target) < k * se + bias


def test_one_sided_coefficient_halves_the_variance():
    full = ll.LimitSpec("thm12", (0.0, 1.0, 1.0), G)
    half = ll.LimitSpec("thm12", (0.0, 1.0, 0.0), G)
    assert half.variance() == pytest.approx(full.variance() / 2)
    x = half.batch(2000, 1)
    assert _within(x * x, half.variance())


def test_zero_coefficient_gives_zero():
    assert ll.sample_limit_thm12(1.0, 0.0, 0.0, G, rng_stream(0, 0)) == 0.0


def test_reflection_symmetry():
    s = _sheet(2)
    neg = SheetSample(G, -s.increments)
    a = ll.sample_limit_thm12(1.0, 2.0, 0.5, G, s)
    b = ll.sample_limit_thm12(1.0, 0.5, 2.0, G, neg)
    assert a == pytest.approx(-b, rel=1e-12)


def test_mixed_limit_scales_with_the_norm_bit_for_bit():
    s = _sheet(3)
    a = ll.sample_limit_thm13(BUMP, G, s, z=0.7)
    b = ll.sample_limit_thm13(BUMP.scaled(2.0), G, s, z=0.7)
    assert b == 2 * a
    assert ll.sample_limit_thm13(BUMP, G, s, z=-0.7) == -a


def test_mixed_limit_needs_z_with_a_fixed_sheet():
    with pytest.raises(ValueError):
        ll.sample_limit_thm13(BUMP, G, _sheet(0))


@pytest.mark.parametrize("spec", [
    ll.LimitSpec("thm12", (1.0, 1.0, 1.0), G),
    ll.LimitSpec("thm13", (BUMP,), G),
    ll.LimitSpec("thm31", ("ii", 0.0, None), G),
    ll.LimitSpec("thm31", ("iii", 1.0, None), G),
    ll.LimitSpec("thm32", ("ii", BUMP, None), G),
    ll.LimitSpec("thm32", ("iii", PhiSpec.indicator(0.0, 1.0), None), G),
], ids=["power-point", "mixed-point", "space-avg-2R-point", "space-avg-window",
        "mixed-space-avg-point", "mixed-space-avg-window"])
def test_second_moment_matches_oracle(spec):
    x = spec.batch(1500, 4)
    assert _within(x * x, spec.variance(), bias=0.02 * spec.variance())


def test_interval_regime_second_moment():
    spec = ll.LimitSpec("thm31", ("i", 1.0, 1.0), G)
    x = spec.batch(1500, 5)
    assert _within(x * x, spec.variance(), bias=0.02 * spec.variance())
    spec = ll.LimitSpec("thm32", ("i", BUMP, 1.0), G)
    x = spec.batch(1500, 5)
    assert _within(x * x, spec.variance(), bias=0.02 * spec.variance())


def test_chaos_limit_second_moment():
    spec = ll.LimitSpec("chaos", (2,), GridSpec(48, 48, 6.0))
    x = spec.batch(1500, 6)
    assert spec.variance() == pytest.approx(0.25)
    assert _within(x * x, 0.25, bias=0.02)
    with pytest.raises(ValueError):
        ll.sample_limit_chaos(0, G, rng_stream(0, 0))


def test_batches_are_reproducible():
    spec = ll.LimitSpec("thm13", (BUMP,), G)
    np.testing.assert_array_equal(spec.batch(3, 8, start=2), spec.batch(5, 8)[2:])


def test_spec_validation():
    with pytest.raises(ValueError):
        ll.LimitSpec("thm99", (), G)
    with pytest.raises(PreconditionError):
        ll.LimitSpec("thm13", (PhiSpec.constant(1.0),), G)
    with pytest.raises(ValueError):
        ll.LimitSpec("thm31", ("iv", 1.0, None), G)
    with pytest.raises(ValueError):
        ll.LimitSpec("thm31", ("i", 1.0, None), G)
    with pytest.raises(ValueError):
        ll.LimitSpec("thm12", (-1.0, 1.0, 1.0), G)
    with pytest.raises(ValueError):
        ll.sample_limit_thm12(1.0, 1.0, 1.0, GridSpec(8, 8, 6.0, horizon=2.0), rng_stream(0, 0))


def test_as_dict_is_json_ready():
    import json
    d = ll.LimitSpec("thm32", ("i", BUMP, 1.0), G).as_dict()
    assert json.loads(json.dumps(d))["params"][1]["kind"] == "gaussian_bump"
