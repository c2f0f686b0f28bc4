"""Discretized mild solutions of the stochastic heat equation.

Every sampler reduces to a Walsh sum ``sum_ij k_ij * integrand_ij * dW_ij``
with the integrand read at each cell's left time edge.  ``k`` is the cell-RMS
of the deterministic kernel (see :mod:`shelab.kernels`).

Grids passed to the physical-time samplers may be given either on the unit
time interval (``horizon == 1``; space in units of ``sqrt(t)``) or already on
``[0, t]`` (``horizon == t``).  The rescaled sampler always works on the unit
interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .phi import PhiSpec, PreconditionError
from .randfield import (NS_SOLUTION, GridSpec, SheetSample, cell_values, draw_increments,
                        rng_stream, sheet_values)

# increments per chunk in batched sampling (~160 MB of float64)
CHUNK_ELEMENTS = 20_000_000


class BlowUpError(RuntimeError):
    """The nonlinear field exceeded the magnitude cap."""

    def __init__(self, step: int, magnitude: float):
        super().__init__(f"field magnitude {magnitude:.3g} exceeded the cap at step {step}")
        self.step = step


class ChaosResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MildSample:
    value: float
    t: float
    x: float
    grid: GridSpec
    phi: PhiSpec | None
    seed: object = None
    flags: tuple = field(default=())


# -- grids -------------------------------------------------------------------

def physical_grid(grid: GridSpec, t: float) -> GridSpec:
    """Map a unit-interval grid to ``[0, t]`` (space scaled by ``sqrt t``)."""
    if math.isclose(grid.horizon, t, rel_tol=1e-12):
        return grid
    if not math.isclose(grid.horizon, 1.0):
        raise ValueError(f"grid horizon {grid.horizon} is neither 1 nor t={t}")
    return GridSpec(grid.n_time, grid.n_space, grid.y_max * math.sqrt(t), t,
                    grid.time_grading, grid.space_grading)


def default_grid(t: float = 1.0, x: float = 0.0, R: float = 0.0, n_time: int = 512,
                 n_space: int = 512, **kw) -> GridSpec:
    """Unit-interval grid truncated at ``(|x| + R) / sqrt(t) + 6``."""
    y_max = (abs(x) + R) / math.sqrt(t) + 6.0
    return GridSpec(n_time, n_space, y_max, 1.0, **kw)


def _check(phi: PhiSpec, t: float):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if phi.kind == "power":
        alpha, cp, cm = phi.params
        if not all(math.isfinite(v) for v in (alpha, cp, cm)):
            raise PreconditionError("power coefficient with non-finite parameters")
    if phi.kind == "table" and not np.all(np.isfinite(phi._table[1])):
        raise PreconditionError("table coefficient with non-finite samples")


# -- Walsh sums ----------------------------------------------------------------

def walsh_sum(weights: np.ndarray, phi: PhiSpec, increments: np.ndarray, grid: GridSpec,
              scale_in: float = 1.0, subcell=None) -> np.ndarray:
    """``sum_ij weights_ij phi(scale_in * W_ij) dW_ij`` over the trailing 2 axes.

    For constant ``phi`` the constant multiplies the finished sum, so the
    result is linear in the constant bit for bit.  ``subcell = (a, factor)``
    replaces ``phi`` by the sub-cell integrand of :func:`subcell_model`.
    """
    if phi.kind == "constant":
        c = phi.params[0]
        return c * np.sum(weights * increments, axis=(-2, -1))
    w_left = cell_values(sheet_values(increments, grid.n_space), grid)
    if subcell is None:
        psi = phi(scale_in * w_left)
    else:
        a, factor = subcell
        psi = np.sqrt(factor * phi.smoothed_square(scale_in * w_left, a))
    return np.sum(weights * psi * increments, axis=(-2, -1))


def _require_nonnegative(phi: PhiSpec):
    p = phi.params
    ok = {"constant": lambda: p[0] >= 0, "gaussian_bump": lambda: p[0] >= 0,
          "indicator": lambda: p[2] >= 0, "power": lambda: p[1] >= 0 and p[2] >= 0,
          "table": lambda: min(phi._table[1]) >= 0}[phi.kind]()
    if not ok:
        raise PreconditionError(f"sub-cell integrand needs phi >= 0, got {phi.label()}")


@lru_cache(maxsize=32)
def subcell_model(phi: PhiSpec, grid: GridSpec, T: float, x: float, scale_in: float):
    """Per-cell smoothing variance and mean correction for the sub-cell integrand.

    On a fixed grid ``phi(scale_in W)`` stops being resolved once
    ``1 / scale_in`` is far below the sub-cell spread of W, and a single node
    value per cell makes the quadratic variation needlessly rough.  The
    sub-cell integrand is ``psi^2 = factor * E phi^2(scale_in (W_read + sqrt(v) Z))``
    with ``v`` the sub-cell variance; ``factor`` makes ``E psi^2`` integrate
    exactly to ``int_cell p^2 E phi^2(scale_in W(s, y))`` against the kernel.
    Returns ``(a, factor)`` with ``a = scale_in^2 v``.
    """
    _require_nonnegative(phi)
    c2 = scale_in * scale_in
    v = grid.subcell_variance
    exact = kernels.cell_kernel_integrals(
        grid, T, x, lambda s, y: phi.second_moment(c2 * s * np.abs(y)))
    p2 = kernels.heat_sq_cell_integrals(grid.time_edges, grid.space_edges, T, x)
    denom = p2 * phi.second_moment(c2 * (grid.readout_variance + v))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(denom > 0, exact / denom, 0.0)
    a, factor = c2 * v, factor
    a.flags.writeable = False
    factor.flags.writeable = False
    return a, factor


def _subcell(integrand, phi, grid, T, x, scale_in):
    if integrand == "node":
        return None
    if integrand != "subcell":
        raise ValueError(f"integrand must be 'node' or 'subcell', got {integrand!r}")
    if phi.kind == "constant":
        return None
    return subcell_model(phi, grid, float(T), float(x), float(scale_in))


def _batched(fn, grid: GridSpec, n: int, seed: int, start: int, namespace: int,
             extra_elements: int = 0):
    per = grid.n_time * 2 * grid.n_space + extra_elements
    chunk = max(1, CHUNK_ELEMENTS // per)
    out = np.empty(n)
    for lo in range(0, n, chunk):
        idx = range(start + lo, start + min(n, lo + chunk))
        inc = np.stack([draw_increments(grid, rng_stream(seed, k, namespace)) for k in idx])
        out[lo:lo + len(idx)] = fn(inc)
    return out


def _rng_or_sheet(grid, rng):
    if isinstance(rng, SheetSample):
        if rng.grid != grid:
            raise ValueError("sheet grid does not match the requested grid")
        return rng.increments, rng.seed
    return draw_increments(grid, rng), None


# -- linear equation ----------------------------------------------------------

def simulate_mild(phi: PhiSpec, t: float, x: float, grid: GridSpec, rng,
                  integrand: str = "node") -> MildSample:
    """One sample of ``u(t, x) = int_0^t int p_{t-s}(x-y) phi(W(s,y)) W(ds,dy)``.

    ``rng`` is a ``numpy.random.Generator`` or a :class:`SheetSample` already
    on the physical grid.
    """
    _check(phi, t)
    g = physical_grid(grid, t)
    inc, seed = _rng_or_sheet(g, rng)
    k = kernels.point_kernel(g, float(t), float(x))
    sub = _subcell(integrand, phi, g, t, x, 1.0)
    val = float(walsh_sum(k, phi, inc, g, subcell=sub))
    return MildSample(val, t, x, g, phi, seed)


def mild_batch(phi: PhiSpec, t: float, x: float, grid: GridSpec, n: int, seed: int,
               start: int = 0, namespace: int = NS_SOLUTION, integrand: str = "node"
               ) -> np.ndarray:
    """``n`` replicates of :func:`simulate_mild`, replicate ``k`` on stream ``start + k``."""
    _check(phi, t)
    g = physical_grid(grid, t)
    k = kernels.point_kernel(g, float(t), float(x))
    sub = _subcell(integrand, phi, g, t, x, 1.0)
    return _batched(lambda inc: walsh_sum(k, phi, inc, g, subcell=sub), g, n, seed, start,
                    namespace)


def simulate_rescaled(phi: PhiSpec, t: float, x: float, grid: GridSpec, rng,
                      integrand: str = "node") -> MildSample:
    """One sample of ``t^(1/4) int_0^1 int p_{1-s}(x/sqrt t - y) phi(t^(3/4) W) W(ds,dy)``.

    Equal in law to :func:`simulate_mild` by Brownian-sheet scaling.
    """
    _check(phi, t)
    _require_unit(grid)
    inc, seed = _rng_or_sheet(grid, rng)
    k = kernels.point_kernel(grid, 1.0, x / math.sqrt(t))
    sub = _subcell(integrand, phi, grid, 1.0, x / math.sqrt(t), t**0.75)
    val = t**0.25 * float(walsh_sum(k, phi, inc, grid, t**0.75, sub))
    return MildSample(val, t, x, grid, phi, seed)


def rescaled_batch(phi: PhiSpec, t: float, x: float, grid: GridSpec, n: int, seed: int,
                   start: int = 0, namespace: int = NS_SOLUTION, integrand: str = "node"
                   ) -> np.ndarray:
    _check(phi, t)
    _require_unit(grid)
    k = kernels.point_kernel(grid, 1.0, x / math.sqrt(t))
    sub = _subcell(integrand, phi, grid, 1.0, x / math.sqrt(t), t**0.75)
    return t**0.25 * _batched(lambda inc: walsh_sum(k, phi, inc, grid, t**0.75, sub),
                              grid, n, seed, start, namespace)


def discrete_sd(t: float, x: float, grid: GridSpec) -> float:
    """Standard deviation of the constant-one Walsh sum, ``sqrt(sum k^2 |cell|)``."""
    g = physical_grid(grid, t)
    k = kernels.point_kernel(g, float(t), float(x))
    return math.sqrt(float(np.sum(k * k * g.cell_areas)))


def linear_exact_batch(phi: PhiSpec, t: float, x: float, grid: GridSpec, n: int, seed: int,
                       start: int = 0, namespace: int = NS_SOLUTION) -> np.ndarray:
    """Exact draws of the discretized ``u(t, x)`` for constant ``phi``.

    The scheme's sum ``c sum k dW`` is Gaussian with variance
    ``c^2 sum k^2 |cell|``, so one normal per replicate (stream ``start + k``)
    reproduces its law without building the sheet.
    """
    if phi.kind != "constant":
        raise ValueError("the exact sampler needs a constant coefficient")
    _check(phi, t)
    sd = abs(phi.params[0]) * discrete_sd(t, x, grid)
    return np.array([sd * rng_stream(seed, start + k, namespace).standard_normal()
                     for k in range(n)])


def _require_unit(grid):
    if grid.horizon != 1.0:
        raise ValueError("the rescaled representation lives on the unit time interval")


def simulate_space_average(phi: PhiSpec, t: float, R: float, grid: GridSpec, rng) -> float:
    """One sample of ``u_R(t) = int_{-R}^{R} u(t, x) dx``.

    The ``x`` integral is done inside the kernel,
    ``K = Phi((R-y)/sqrt(t-s)) - Phi((-R-y)/sqrt(t-s))``, leaving one Walsh sum.
    """
    _check(phi, t)
    if not R > 0:
        raise ValueError("R must be positive")
    g = physical_grid(grid, t)
    inc, _ = _rng_or_sheet(g, rng)
    k = kernels.interval_kernel_weights(g, float(t), float(R))
    return float(walsh_sum(k, phi, inc, g))


def space_average_batch(phi: PhiSpec, t: float, R: float, grid: GridSpec, n: int, seed: int,
                        start: int = 0, namespace: int = NS_SOLUTION) -> np.ndarray:
    _check(phi, t)
    g = physical_grid(grid, t)
    k = kernels.interval_kernel_weights(g, float(t), float(R))
    return _batched(lambda inc: walsh_sum(k, phi, inc, g), g, n, seed, start, namespace)


# -- chaos expansion and the nonlinear equation -------------------------------

def _field_setup(grid: GridSpec, t: float):
    g = physical_grid(grid, t)
    if g.time_grading != 1.0:
        raise ValueError("field recursions need a uniform time grid")
    P, G, centres = kernels.step_operators(g, g.ds)
    return g, P, G


def _chaos_core(n: int, inc: np.ndarray, g: GridSpec, P, G, k) -> np.ndarray:
    """Top chaos level ``V_n(t, x)`` for a batch of increments ``(B, nt, M)``.

    Levels ``1..n-1`` are carried as fields on cell centres by exponential
    Euler steps; the top level is a Walsh sum of ``V_{n-1}`` against the point
    kernel, so ``n = 1`` is exactly the constant-coefficient Walsh sum.
    """
    B, nt, M = inc.shape
    if n == 1:
        return np.sum(k * inc, axis=(-2, -1))
    levels = np.zeros((n, B, M))
    levels[0] = 1.0
    acc = np.zeros(B)
    PT, GT = P.T, G.T
    for i in range(nt):
        dW = inc[:, i, :]
        acc += (levels[n - 1] * dW) @ k[i]
        new = levels.copy()
        for lev in range(1, n):
            new[lev] = levels[lev] @ PT + (levels[lev - 1] * dW) @ GT
        levels = new
    return acc


def chaos_term(n: int, t: float, x: float, grid: GridSpec, rng) -> MildSample:
    """Sample of the ``n``-th chaos ``I_n(f_{t,x,n})`` of the linear equation ``sigma(u) = u``.

    Computed by the Picard recursion ``V_k = int p V_{k-1} dW``, ``V_0 = 1``.
    ``n = 0`` returns the constant term 1.
    """
    if n < 0 or int(n) != n:
        raise ValueError("chaos order must be a nonnegative integer")
    if n == 0:
        return MildSample(1.0, t, x, grid, None)
    g, P, G = _field_setup(grid, t)
    flags = ()
    if n / g.n_time >= 0.1:
        warnings.warn(f"chaos order {n} is large for {g.n_time} time cells",
                      ChaosResolutionWarning, stacklevel=2)
        flags = ("under_resolved",)
    inc, seed = _rng_or_sheet(g, rng)
    k = kernels.point_kernel(g, float(t), float(x))
    val = float(_chaos_core(n, inc[None], g, P, G, k)[0])
    return MildSample(val, t, x, g, None, seed, flags)


def chaos_batch(n: int, t: float, x: float, grid: GridSpec, count: int, seed: int,
                start: int = 0, namespace: int = NS_SOLUTION) -> np.ndarray:
    if n == 0:
        return np.ones(count)
    g, P, G = _field_setup(grid, t)
    k = kernels.point_kernel(g, float(t), float(x))
    return _batched(lambda inc: _chaos_core(n, inc, g, P, G, k), g, count, seed, start, namespace)


def _nonlinear_core(sigma: PhiSpec, inc, g, P, G, k, cap: float) -> np.ndarray:
    B, nt, M = inc.shape
    v = np.zeros((B, M))   # u - 1 on cell centres
    acc = np.zeros(B)
    PT, GT = P.T, G.T
    for i in range(nt):
        dW = inc[:, i, :]
        s = sigma(1.0 + v)
        noise = s * dW
        acc += noise @ k[i]
        v = v @ PT + noise @ GT
        peak = float(np.max(np.abs(v))) if v.size else 0.0
        if not peak <= cap:
            raise BlowUpError(i + 1, peak)
    return 1.0 + acc


def _check_lipschitz(sigma: PhiSpec):
    if not math.isfinite(sigma.lipschitz_constant()):
        raise PreconditionError(f"{sigma.label()} is not Lipschitz")


def simulate_nonlinear(sigma: PhiSpec, t: float, x_eval: float, grid: GridSpec, rng,
                       cap: float = 1e8) -> float:
    """``u(t, x)`` for ``du = u''/2 dt + sigma(u) W(dt,dx)`` with ``u(0, .) = 1``.

    Exponential Euler: each step applies the heat semigroup to the field and
    adds the one-step Walsh increment.  The value at ``x_eval`` is the mild
    Walsh sum of ``sigma(u)`` against the point kernel.
    """
    _check_lipschitz(sigma)
    g, P, G = _field_setup(grid, t)
    inc, _ = _rng_or_sheet(g, rng)
    k = kernels.point_kernel(g, float(t), float(x_eval))
    return float(_nonlinear_core(sigma, inc[None], g, P, G, k, cap)[0])


def nonlinear_batch(sigma: PhiSpec, t: float, x_eval: float, grid: GridSpec, n: int,
                    seed: int, start: int = 0, namespace: int = NS_SOLUTION,
                    cap: float = 1e8) -> np.ndarray:
    _check_lipschitz(sigma)
    g, P, G = _field_setup(grid, t)
    k = kernels.point_kernel(g, float(t), float(x_eval))
    return _batched(lambda inc: _nonlinear_core(sigma, inc, g, P, G, k, cap),
                    g, n, seed, start, namespace)
