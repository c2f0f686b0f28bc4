"""Deterministic cell weights for discretized Walsh integrals.

A Walsh sum over grid cells uses, for each cell, the root-mean-square of the
deterministic kernel over that cell.  With that choice the discrete sum has
exactly the second moment of the continuous integral whenever the random
integrand is constant on cells, which is what makes the constant-coefficient
variance law exact on any grid.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import erf, erfc, exp1, ndtr

from .randfield import GridSpec

_SQRT_PI = np.sqrt(np.pi)


def _erf_antiderivative(v, c):
    """``F(v, c) = int_0^v erf(c / w) dw = v erf(c/v) + c E1(c^2/v^2) / sqrt(pi)``."""
    v, c = np.broadcast_arrays(np.asarray(v, float), np.asarray(c, float))
    out = np.zeros(v.shape)
    ok = (v > 0) & (c != 0)
    vv, cc = v[ok], c[ok]
    out[ok] = vv * erf(cc / vv) + cc * exp1((cc / vv) ** 2) / _SQRT_PI
    return out


def heat_sq_cell_integrals(time_edges, space_edges, T: float, x: float) -> np.ndarray:
    """``int_cell p^2_{T-r}(x - y) dr dy`` for every cell, in closed form.

    Uses ``int_a^b p_tau^2(x-y) dy = [erf((b-x)/sqrt tau) - erf((a-x)/sqrt tau)]
    / (4 sqrt(pi tau))`` and the substitution ``tau = v^2``.
    """
    time_edges = np.asarray(time_edges, float)
    if time_edges[-1] > T * (1 + 1e-12):
        raise ValueError("time edges extend past the terminal time")
    v = np.sqrt(np.clip(T - time_edges, 0.0, None))
    c = np.asarray(space_edges, float) - x
    F = _erf_antiderivative(v[:, None], c[None, :])
    D = np.diff(F, axis=1)  # int over each space cell, as a function of v
    return (D[:-1] - D[1:]) / (2.0 * _SQRT_PI)


def rms_weights(integrals: np.ndarray, areas: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(integrals, 0.0, None) / areas)


@lru_cache(maxsize=64)
def point_kernel(grid: GridSpec, T: float, x: float) -> np.ndarray:
    """RMS of ``p_{T-r}(x - y)`` over each cell of ``grid``."""
    w = rms_weights(heat_sq_cell_integrals(grid.time_edges, grid.space_edges, T, x),
                    grid.cell_areas)
    w.flags.writeable = False
    return w


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _gauss_panels(edges, q_nodes=_GL_NODES, q_weights=_GL_WEIGHTS):
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return a + half * (q_nodes + 1.0), half * q_weights


def interval_kernel(tau, y, half_width: float, center: float = 0.0):
    """``int_{center-h}^{center+h} p_tau(x - y) dx`` as a Gaussian CDF difference."""
    st = np.sqrt(tau)
    return ndtr((center + half_width - y) / st) - ndtr((center - half_width - y) / st)


@lru_cache(maxsize=64)
def interval_kernel_weights(grid: GridSpec, T: float, half_width: float) -> np.ndarray:
    """RMS over each cell of ``K(r, y) = int_{-h}^{h} p_{T-r}(x - y) dx``.

    Tensor Gauss-Legendre (8 x 8 per cell) in ``v = sqrt(T - r)`` and ``y``.
    """
    v_edges = np.sqrt(np.clip(T - grid.time_edges, 0.0, None))[::-1]
    vn, vw = _gauss_panels(v_edges)         # (nt, q), ascending v
    yn, yw = _gauss_panels(grid.space_edges)  # (ns, q)
    tau = (vn ** 2)[:, :, None, None]
    K = interval_kernel(np.maximum(tau, 1e-300), yn[None, None, :, :], half_width)
    # dtau = 2 v dv
    wt = (2 * vn * vw)[:, :, None, None] * yw[None, None, :, :]
    integrals = np.sum(K * K * wt, axis=(1, 3))[::-1]
    w = rms_weights(integrals, grid.cell_areas)
    w.flags.writeable = False
    return w


def one_step_covariance(d, dt: float):
    """Covariance at distance ``d`` of ``int_0^dt int p_{dt-r}(y - z) W(dr, dz)``.

    ``int_0^dt p_{2 tau}(d) dtau = [V e^{-a^2/V^2} - a sqrt(pi) erfc(a/V)] / sqrt(pi)``
    with ``V = sqrt(dt)`` and ``a = |d| / 2``.
    """
    a = np.abs(np.asarray(d, float)) / 2.0
    V = np.sqrt(dt)
    return (V * np.exp(-(a / V) ** 2) - a * _SQRT_PI * erfc(a / V)) / _SQRT_PI


@lru_cache(maxsize=16)
def step_operators(grid: GridSpec, dt: float):
    """One exponential-Euler step on cell centres.

    Returns ``(P, G, centres)``.  ``P[a, b]`` is the heat-semigroup mass moved
    from cell ``b`` to centre ``a`` over ``dt``.  ``G`` maps cell increments to
    the one-step stochastic convolution at the centres: it is the symmetric
    square root of the exact one-step covariance matrix, scaled by the cell
    sizes, so constant-coefficient steps have the exact covariance at centres.
    """
    e = grid.space_edges
    centres = 0.5 * (e[1:] + e[:-1])
    c = e[None, :] - centres[:, None]
    P = np.diff(ndtr(c / np.sqrt(dt)), axis=1)
    C = one_step_covariance(centres[:, None] - centres[None, :], dt)
    lam, U = np.linalg.eigh(C)
    S = (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.T
    G = S / np.sqrt(dt * np.diff(e))[None, :]
    return P, G, centres


def _cos_nodes(nq: int):
    # Gauss-Legendre on [0, 1] pushed through (1 - cos(pi x)) / 2, which clusters
    # nodes quadratically at both ends and absorbs |.|^(-1/2) endpoint singularities
    x, w = np.polynomial.legendre.leggauss(nq)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    return 0.5 * (1.0 - np.cos(np.pi * x)), 0.5 * np.pi * np.sin(np.pi * x) * w


def _time_nodes(edges: np.ndarray, T: float, nq: int):
    """Quadrature nodes per time cell; the cell ending at ``T`` gets a quartic map."""
    h, dh = _cos_nodes(nq)
    h = np.tile(h, (len(edges) - 1, 1))
    dh = np.tile(dh, (len(edges) - 1, 1))
    if edges[-1] >= T * (1 - 1e-12):
        x, w = np.polynomial.legendre.leggauss(nq)
        x, w = 0.5 * (x + 1.0), 0.5 * w
        h[-1], dh[-1] = 1.0 - (1.0 - x) ** 4, 4.0 * (1.0 - x) ** 3 * w
    width = np.diff(edges)[:, None]
    return edges[:-1, None] + width * h, width * dh


def cell_kernel_integrals(grid: GridSpec, T: float, x: float, h, nq: int = 12,
                          time_edges=None) -> np.ndarray:
    """``int_cell p^2_{T-s}(x - y) h(s, y) ds dy`` for every cell.

    ``h`` is a vectorized callable, smooth inside cells and allowed an
    integrable ``|.|^(-1/2)`` singularity on cell edges (``s = 0``, ``y = 0``).
    Space is integrated in ``w = (y - x) / sqrt(T - s)`` clipped to
    ``|w| <= 8``, which stays accurate when the kernel is far narrower than a
    cell.  ``time_edges`` overrides the grid's (used to truncate at ``r``).
    """
    te = grid.time_edges if time_edges is None else np.asarray(time_edges, float)
    e = grid.space_edges
    s, ws = _time_nodes(te, T, nq)
    hq, dhq = _cos_nodes(nq)
    out = np.zeros((len(te) - 1, len(e) - 1))
    for i in range(len(te) - 1):
        if ws[i].sum() == 0.0:
            continue
        si = s[i][:, None, None]
        rt = np.sqrt(np.maximum(T - s[i], 1e-300))[:, None, None]
        ca = (e[:-1] - x)[None, :, None] / rt
        cb = (e[1:] - x)[None, :, None] / rt
        acc = 0.0
        # pieces keep the kernel's peak and shoulders on node clusters
        for lo, hi in zip(_W_BREAKS[:-1], _W_BREAKS[1:]):
            wa, wb = np.clip(ca, lo, hi), np.clip(cb, lo, hi)
            w = wa + (wb - wa) * hq
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.exp(-w * w) / (2 * np.pi * rt) * h(si, x + rt * w)
            f = np.where(wb > wa, f, 0.0)
            acc = acc + np.einsum("qjk,qjk,k,q->j", f, wb - wa, dhq, ws[i])
        out[i] = acc
    return out


_W_BREAKS = (-8.0, -2.5, 0.0, 2.5, 8.0)


def cell_integrals(grid: GridSpec, f, nq: int = 12, time_edges=None) -> np.ndarray:
    """``int_cell f(s, y) ds dy`` by per-cell tensor quadrature.

    Nodes cluster at every cell edge (and quartically at the final time), so
    ``f`` may carry integrable ``|.|^(-1/2)`` singularities on edges.  Meant
    for kernels smooth on the cell scale; see :func:`cell_kernel_integrals`
    for the sharply peaked heat kernel.
    """
    te = grid.time_edges if time_edges is None else np.asarray(time_edges, float)
    e = grid.space_edges
    s, ws = _time_nodes(te, grid.horizon, nq)
    hq, dhq = _cos_nodes(nq)
    y = e[:-1, None] + np.diff(e)[:, None] * hq
    wy = np.diff(e)[:, None] * dhq
    out = np.zeros((len(te) - 1, len(e) - 1))
    for i in range(len(te) - 1):
        if ws[i].sum() == 0.0:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = f(s[i][:, None, None], y[None, :, :])
        vals = np.where(np.isfinite(vals), vals, 0.0)
        out[i] = np.einsum("qjk,q,jk->j", vals, ws[i], wy)
    return out
