"""Samplers for the limit laws, each on an independent sheet.

Every sampler draws its own sheet ``W_hat`` (and normal ``Z`` where needed)
from the ``NS_LIMIT`` stream namespace in batch mode, so limit samples never
share randomness with solution samples of the same experiment.  The mixed
Gaussian limits are sampled as ``Z * sqrt(L) * ||phi||`` with ``L`` the
grid-floor weighted local time from :mod:`shelab.local_time`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, local_time, oracles
from .phi import PhiSpec
from .randfield import NS_LIMIT, GridSpec, SheetSample, draw_increments, rng_stream
from .she_solver import _chaos_core, _field_setup, walsh_sum

THEOREMS = ("thm12", "thm13", "thm31", "thm32", "chaos")
REGIMES = ("i", "ii", "iii")


def _unit(grid: GridSpec):
    if grid.horizon != 1.0:
        raise ValueError("limit samplers work on the unit time interval")


def _increments(grid: GridSpec, rng):
    if isinstance(rng, SheetSample):
        if rng.grid != grid:
            raise ValueError("sheet grid does not match")
        return rng.increments
    return draw_increments(grid, rng)


def _regime(regime: str, c):
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
    if regime == "i" and not (c is not None and c > 0):
        raise ValueError("regime (i) needs c > 0")


def _walsh_weights(kind: str, grid: GridSpec, c=None) -> np.ndarray:
    if kind == "point":
        return kernels.point_kernel(grid, 1.0, 0.0)
    if kind == "interval":
        return kernels.interval_kernel_weights(grid, 1.0, float(c))
    if kind == "window":
        # kernel-free sum over [0, 1] x [-1, 1]
        return np.broadcast_to(local_time.window_mask(grid, 1.0), (grid.n_time, 2 * grid.n_space))
    raise ValueError(kind)


def _lt_weight(regime: str, c=None) -> tuple:
    return {"i": ("interval", c), "ii": ("point", 2.0), "iii": ("point", 2.0, 1.0)}[regime]


# -- single samples -----------------------------------------------------------------

def sample_limit_thm12(alpha: float, c_plus: float, c_minus: float, grid: GridSpec, rng) -> float:
    """``X = int int p_{1-s}(y) phi(W_hat) W_hat(ds, dy)`` with ``phi = c_+- |x|^alpha``."""
    _unit(grid)
    phi = PhiSpec.power(alpha, c_plus, c_minus)
    return float(walsh_sum(_walsh_weights("point", grid), phi, _increments(grid, rng), grid))


def _mixed(L: float, phi: PhiSpec, z: float) -> float:
    return z * math.sqrt(L) * phi.l2_norm


def _normal(rng, z):
    if z is not None:
        return float(z)
    if isinstance(rng, SheetSample):
        raise ValueError("pass z when sampling from a fixed sheet")
    return float(rng.standard_normal())


def sample_limit_thm13(phi: PhiSpec, grid: GridSpec, rng, z: float | None = None) -> float:
    """``Z sqrt(L_{0,1}) ||phi||`` with ``L`` on an independent sheet.

    With a ``Generator`` the sheet is drawn first and ``Z`` next from the
    same stream; with a :class:`SheetSample` pass ``z`` explicitly.
    """
    phi.require_l2()
    _unit(grid)
    inc = _increments(grid, rng)
    sheet = rng if isinstance(rng, SheetSample) else SheetSample(grid, inc)
    return _mixed(local_time.floor_local_time(sheet), phi, _normal(rng, z))


def sample_limit_thm31(regime: str, alpha: float, c: float | None, grid: GridSpec, rng) -> float:
    """Space-average limits for ``phi = |x|^alpha``.

    (i) interval kernel over ``[-c, c]``; (ii) twice the point-kernel
    integral; (iii) kernel-free integral over ``[0, 1] x [-1, 1]``.
    """
    _regime(regime, c)
    _unit(grid)
    phi = PhiSpec.power(alpha, 1.0, 1.0)
    inc = _increments(grid, rng)
    kind = {"i": "interval", "ii": "point", "iii": "window"}[regime]
    val = float(walsh_sum(_walsh_weights(kind, grid, c), phi, inc, grid))
    return 2.0 * val if regime == "ii" else val


def sample_limit_thm32(regime: str, phi: PhiSpec, c: float | None, grid: GridSpec, rng,
                       z: float | None = None) -> float:
    """Mixed-Gaussian space-average limits with the regime's local-time weight."""
    phi.require_l2()
    _regime(regime, c)
    _unit(grid)
    inc = _increments(grid, rng)
    sheet = rng if isinstance(rng, SheetSample) else SheetSample(grid, inc)
    L = local_time.floor_local_time(sheet, 1.0, _lt_weight(regime, c))
    return _mixed(L, phi, _normal(rng, z))


def sample_limit_chaos(n: int, grid: GridSpec, rng) -> float:
    """Iterated integral over the time simplex at ``(t, x) = (1, 0)``."""
    if n < 1 or int(n) != n:
        raise ValueError("chaos order must be a positive integer")
    _unit(grid)
    g, P, G = _field_setup(grid, 1.0)
    k = kernels.point_kernel(g, 1.0, 0.0)
    return float(_chaos_core(int(n), _increments(grid, rng)[None], g, P, G, k)[0])


# -- specs and batches -------------------------------------------------------------

@dataclass(frozen=True)
class LimitSpec:
    """A limit random variable plus the grid its sampler uses.

    ``params`` by theorem: ``thm12 (alpha, c_plus, c_minus)``, ``thm13 (phi,)``,
    ``thm31 (regime, alpha, c)``, ``thm32 (regime, phi, c)``, ``chaos (n,)``.
    """

    theorem: str
    params: tuple
    grid: GridSpec

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ValueError(f"unknown theorem {self.theorem!r}")
        if self.theorem in ("thm13", "thm32"):
            phi = self.params[0] if self.theorem == "thm13" else self.params[1]
            phi.require_l2()
        if self.theorem in ("thm12", "thm31"):
            alpha = self.params[0] if self.theorem == "thm12" else self.params[1]
            if alpha < 0:
                raise ValueError("alpha must be >= 0")
        if self.theorem in ("thm31", "thm32"):
            _regime(self.params[0], self.params[2])

    def sample(self, rng, z: float | None = None) -> float:
        p, g = self.params, self.grid
        if self.theorem == "thm12":
            return sample_limit_thm12(*p, g, rng)
        if self.theorem == "thm13":
            return sample_limit_thm13(p[0], g, rng, z)
        if self.theorem == "thm31":
            return sample_limit_thm31(*p, g, rng)
        if self.theorem == "thm32":
            return sample_limit_thm32(*p, g, rng, z)
        return sample_limit_chaos(p[0], g, rng)

    def batch(self, n: int, seed: int, start: int = 0, namespace: int = NS_LIMIT) -> np.ndarray:
        """``n`` samples, sample ``k`` from stream ``(namespace, start + k)``."""
        return np.array([self.sample(rng_stream(seed, start + k, namespace)) for k in range(n)])

    def variance(self) -> float:
        """Oracle variance of the limit (as stated for the space-average regimes)."""
        p = self.params
        if self.theorem == "thm12":
            return oracles.thm12_variance(*p)
        if self.theorem == "thm13":
            return oracles.thm13_variance(p[0])
        if self.theorem == "thm31":
            return oracles.thm31_variance(p[0], p[1], p[2])
        if self.theorem == "thm32":
            return oracles.thm32_variance(p[0], p[1], p[2])
        return oracles.chaos_variance(p[0], 1.0)

    def as_dict(self) -> dict:
        params = [x.as_dict() if isinstance(x, PhiSpec) else x for x in self.params]
        return {"theorem": self.theorem, "params": params, "grid": self.grid.as_dict()}
