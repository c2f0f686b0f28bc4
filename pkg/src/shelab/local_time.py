"""Weighted local time of the Brownian sheet at level 0, and its oracles.

The weighted local time is

    L_{0,r} = int_0^r int p^2_{1-s}(y) delta_0(W(s, y)) dy ds,

the L^2 limit of the mollified versions ``L^eps`` with ``delta_0`` replaced by
the Gaussian density ``p_eps``.  It is also the large-time limit of the
quadratic variation of the rescaled solution when ``phi`` is square
integrable, which :func:`quadratic_variation` computes on a grid.

Grid estimators
---------------
A cell ``(i, j)`` reads W once (``randfield.cell_values``) with variance
``sigma^2_ij``, while W keeps moving inside the cell with variance about
``v_ij`` (``GridSpec.subcell_variance``).  The estimator is

    L^eps = sum_ij omega^eps_ij * sqrt((sigma^2 + v + eps^2) / (v + eps^2))
                               * exp(-W_ij^2 / (2 (v + eps^2)))

with ``omega^eps_ij = int_cell p^2_{1-s}(y) (2 pi (s|y| + eps^2))^(-1/2)``.
Each term has expectation ``omega^eps_ij`` exactly, so ``E L^eps`` equals the
deterministic oracle on any grid, and the mollifier never gets narrower than
what the grid can resolve.  The ``eps -> 0`` member is the grid-floor local
time used by the limit samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import beta, betainc, gamma

from . import kernels
from .phi import PhiSpec
from .randfield import NS_AUX, GridSpec, SheetSample, cell_values, draw_increments, \
    rng_stream, sheet_values


@dataclass(frozen=True)
class LocalTimeEstimate:
    epsilon: float
    r: float
    value: float
    grid: GridSpec


@dataclass(frozen=True)
class QvEstimate:
    t: float
    r: float
    x: float
    value: float


def _check_r(r: float):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")


def _check_unit(grid: GridSpec):
    if grid.horizon != 1.0:
        raise ValueError("local times live on the unit time interval")


def grid_floor_epsilon(grid: GridSpec) -> float:
    """``2 (ds dy s_bar)^(1/2)`` with nominal cell sizes and ``s_bar = horizon / 2``.

    Below this width a node-sampled mollifier would undersample W's motion
    inside a cell; epsilon ladders stop here.
    """
    return 2.0 * math.sqrt(grid.ds * grid.dy * grid.horizon / 2.0)


# -- cell weights ---------------------------------------------------------------

def _truncated_edges(grid: GridSpec, r: float) -> np.ndarray:
    return np.minimum(grid.time_edges, r)


@lru_cache(maxsize=64)
def occupation_weights(grid: GridSpec, epsilon: float = 0.0, r: float = 1.0,
                       weight: tuple = ("point",)) -> np.ndarray:
    """``omega^eps_ij = int_cell kappa(s, y) (2 pi (s|y| + eps^2))^(-1/2) ds dy``, ``s <= r``.

    ``weight`` selects ``kappa``: ``("point",)`` is ``p^2_{1-s}(y)``,
    ``("point", k)`` is ``k p^2_{1-s}(y)``, ``("point", k, h)`` additionally
    restricts to ``|y| <= h`` (``+-h`` must be grid edges) and
    ``("interval", c)`` is ``(int_{-c}^{c} p_{1-s}(x - y) dx)^2``.
    """
    _check_unit(grid)
    _check_r(r)
    eps2 = float(epsilon) ** 2

    def h(s, y):
        return (2 * np.pi * (s * np.abs(y) + eps2)) ** -0.5

    te = _truncated_edges(grid, r)
    if weight[0] == "point":
        k = weight[1] if len(weight) > 1 else 1.0
        w = k * kernels.cell_kernel_integrals(grid, 1.0, 0.0, h, time_edges=te)
        if len(weight) > 2:
            w = w * window_mask(grid, weight[2])
    elif weight[0] == "interval":
        c = float(weight[1])

        def f(s, y):
            K = kernels.interval_kernel(np.maximum(1.0 - s, 1e-300), y, c)
            return K * K * h(s, y)
        w = kernels.cell_integrals(grid, f, time_edges=te)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    w.flags.writeable = False
    return w


def window_mask(grid: GridSpec, half_width: float) -> np.ndarray:
    """0/1 mask of the space cells inside ``[-h, h]``; ``+-h`` must be grid edges."""
    e = grid.space_edges
    if not np.any(np.isclose(e, half_width, rtol=0, atol=1e-12)):
        raise ValueError(f"y = +-{half_width} is not a grid edge")
    centre = 0.5 * (e[1:] + e[:-1])
    return (np.abs(centre) < half_width).astype(float)


def _estimate(wbar: np.ndarray, grid: GridSpec, omega: np.ndarray, epsilon: float):
    v = grid.subcell_variance + epsilon**2
    ratio = np.sqrt((grid.readout_variance + v) / v)
    return np.sum(omega * ratio * np.exp(-wbar * wbar / (2 * v)), axis=(-2, -1))


def _sheet_wbar(sheet: SheetSample) -> np.ndarray:
    _check_unit(sheet.grid)
    return cell_values(sheet.values, sheet.grid)


def weighted_local_time(sheet: SheetSample, epsilon: float, r: float = 1.0) -> LocalTimeEstimate:
    """Mollified weighted local time ``L^eps_{0,r}`` of one sheet on the unit grid."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_r(r)
    if r == 0.0:
        return LocalTimeEstimate(float(epsilon), 0.0, 0.0, sheet.grid)
    om = occupation_weights(sheet.grid, float(epsilon), float(r))
    val = float(_estimate(_sheet_wbar(sheet), sheet.grid, om, float(epsilon)))
    return LocalTimeEstimate(float(epsilon), float(r), val, sheet.grid)


def floor_local_time(sheet: SheetSample, r: float = 1.0, weight: tuple = ("point",)) -> float:
    """Grid-floor local time: the ``eps -> 0`` member of the estimator family.

    Only the sub-cell variance mollifies, so this is the sharpest local time
    the grid supports; its mean equals ``expected_local_time(r)``.
    """
    _check_r(r)
    if r == 0.0:
        return 0.0
    om = occupation_weights(sheet.grid, 0.0, float(r), weight)
    return float(_estimate(_sheet_wbar(sheet), sheet.grid, om, 0.0))


def local_time_batch(grid: GridSpec, epsilons, n: int, seed: int, r: float = 1.0,
                     start: int = 0, namespace: int = NS_AUX, weight: tuple = ("point",)
                     ) -> np.ndarray:
    """Local times on ``n`` common sheets, shape ``(n, len(epsilons))``.

    ``epsilon = 0`` in the list selects the grid-floor estimator.
    """
    _check_unit(grid)
    _check_r(r)
    eps = [float(e) for e in epsilons]
    if any(e < 0 for e in eps):
        raise ValueError("epsilons must be nonnegative")
    oms = [occupation_weights(grid, e, float(r), weight) for e in eps]
    out = np.empty((n, len(eps)))
    for k in range(n):
        inc = draw_increments(grid, rng_stream(seed, start + k, namespace))
        wbar = cell_values(sheet_values(inc, grid.n_space), grid)
        out[k] = [_estimate(wbar, grid, om, e) for om, e in zip(oms, eps)]
    return out


# -- quadratic variation --------------------------------------------------------

def _qv_terms(phi: PhiSpec, t: float, x: float, grid: GridSpec, r: float, integrand: str):
    from .she_solver import _subcell
    xs = x / math.sqrt(t)
    p2 = kernels.heat_sq_cell_integrals(_truncated_edges(grid, r), grid.space_edges, 1.0, xs)
    return p2, _subcell(integrand, phi, grid, 1.0, xs, t**0.75)


def _qv_value(wbar, phi, t, p2, sub):
    c = t**0.75
    if sub is None:
        sq = phi(c * wbar) ** 2
    else:
        a, factor = sub
        sq = factor * phi.smoothed_square(c * wbar, a)
    return c * np.sum(p2 * sq, axis=(-2, -1))


def quadratic_variation(sheet: SheetSample, phi: PhiSpec, t: float, x: float = 0.0,
                        r: float = 1.0, integrand: str = "node") -> QvEstimate:
    """``<M_t(., x)>_r = t^(3/4) int_0^r int p^2_{1-s}(x/sqrt t - y) phi^2(t^(3/4) W) dy ds``.

    ``M_t`` is the martingale whose terminal value is ``t^(1/8)`` times the
    rescaled solution.  ``integrand`` matches the Walsh-sum integrand used to
    sample that solution (``"node"`` or ``"subcell"``).
    """
    phi.require_l2()
    if not t > 0:
        raise ValueError("t must be positive")
    _check_r(r)
    if r == 0.0:
        return QvEstimate(float(t), 0.0, float(x), 0.0)
    p2, sub = _qv_terms(phi, t, x, sheet.grid, r, integrand)
    val = float(_qv_value(_sheet_wbar(sheet), phi, t, p2, sub))
    return QvEstimate(float(t), float(r), float(x), val)


def qv_batch(phi: PhiSpec, ts, grid: GridSpec, n: int, seed: int, x: float = 0.0,
             integrand: str = "subcell", start: int = 0, namespace: int = NS_AUX):
    """Quadratic variations along ``ts`` and the grid-floor local time on common sheets.

    Returns ``(qv, L)`` with ``qv`` of shape ``(n, len(ts))``.
    """
    phi.require_l2()
    _check_unit(grid)
    terms = [_qv_terms(phi, float(t), x, grid, 1.0, integrand) for t in ts]
    om = occupation_weights(grid, 0.0, 1.0)
    qv = np.empty((n, len(ts)))
    L = np.empty(n)
    for k in range(n):
        inc = draw_increments(grid, rng_stream(seed, start + k, namespace))
        wbar = cell_values(sheet_values(inc, grid.n_space), grid)
        qv[k] = [_qv_value(wbar, phi, float(t), p2, sub) for t, (p2, sub) in zip(ts, terms)]
        L[k] = _estimate(wbar, grid, om, 0.0)
    return qv, L


# -- oracles --------------------------------------------------------------------

def _closed_form(r: float) -> float:
    # int p^2_tau(y) |y|^(-1/2) dy = Gamma(1/4) tau^(-3/4) / (2 pi), then a Beta integral in s
    b = beta(0.5, 0.25) * betainc(0.5, 0.25, r) if r > 0 else 0.0
    return (2 * np.pi) ** -1.5 * gamma(0.25) * b


def _substituted(r: float, epsilon: float = 0.0, tol: float = 1e-10) -> float:
    """``int_0^r int p^2_{1-s}(y) (2 pi (s|y| + eps^2))^(-1/2)`` with all singularities removed.

    ``1 - s = v^2`` and ``y = v w`` turn ``p^2 dy ds`` into ``e^{-w^2} dw dv / pi``;
    then ``w = u^2`` and ``v = sin^2(theta)`` make the integrand bounded.
    """
    if r == 0.0:
        return 0.0
    th0 = math.asin((1.0 - r) ** 0.25)
    e2 = epsilon * epsilon

    def f(u, th):
        sn, cs = math.sin(th), math.cos(th)
        v = sn * sn
        # (s v u^2)^(-1/2) = 1 / (u sn sqrt(1 + sn^2) cs): the Jacobian cancels it
        jac = 4.0 * u * sn * cs
        var = (1.0 - v * v) * v * u * u + e2
        return math.exp(-u**4) / math.pi * jac / math.sqrt(2 * math.pi * var) if var > 0 else 0.0

    # the u-integrand decays like exp(-u^4); u = 3 leaves < 1e-35
    val, _ = integrate.dblquad(f, th0, math.pi / 2, 0.0, 3.0, epsabs=tol, epsrel=tol)
    return 2.0 * val  # both half-lines


def _algebraic_weights(r: float, tol: float = 1e-10) -> float:
    """Tensor adaptive quadrature in ``(s, y)`` with QUADPACK algebraic end weights."""
    if r == 0.0:
        return 0.0

    def inner(s, flat=False):
        # y-integral against the y^(-1/2) weight; with flat=True it is returned
        # times (1 - s)^(3/4), computed in y = sqrt(1 - s) z so s = 1 stays finite
        tau = 1.0 - s
        if flat:
            g = lambda z: math.exp(-z * z) / (2 * math.pi)
            val, _ = integrate.quad(g, 0.0, 12.0, weight="alg", wvar=(-0.5, 0.0),
                                    epsabs=tol, epsrel=tol)
        else:
            g = lambda y: math.exp(-y * y / tau) / (2 * math.pi * tau)
            val, _ = integrate.quad(g, 0.0, 12 * math.sqrt(tau), weight="alg",
                                    wvar=(-0.5, 0.0), epsabs=tol, epsrel=tol)
        return 2.0 * val / math.sqrt(2 * math.pi)

    if r < 1.0:
        val, _ = integrate.quad(inner, 0.0, r, weight="alg", wvar=(-0.5, 0.0),
                                epsabs=tol, epsrel=tol, limit=200)
    else:
        val, _ = integrate.quad(lambda s: inner(s, True), 0.0, 1.0, weight="alg",
                                wvar=(-0.5, -0.75), epsabs=tol, epsrel=tol, limit=200)
    return val


def expected_local_time(r: float = 1.0, method: str = "substituted") -> float:
    """``E L_{0,r} = int_0^r int p^2_{1-s}(y) (2 pi s |y|)^(-1/2) dy ds``.

    ``method`` is ``"substituted"`` (singularity-removing substitutions, 2D
    adaptive), ``"algebraic"`` (adaptive with algebraic end weights in the
    original variables) or ``"closed"`` (incomplete Beta function).
    """
    _check_r(r)
    if method == "substituted":
        return _substituted(float(r))
    if method == "algebraic":
        return _algebraic_weights(float(r))
    if method == "closed":
        return float(_closed_form(float(r)))
    raise ValueError(f"unknown method {method!r}")


def expected_smoothed_local_time(epsilon: float, r: float = 1.0) -> float:
    """``E L^eps_{0,r}``: ``E p_eps(W(s,y))`` is a centred Gaussian density with variance ``s|y| + eps^2``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    _check_r(r)
    return _substituted(float(r), float(epsilon))


def expected_weighted_occupation(kappa, y_range=(-np.inf, np.inf), tol: float = 1e-9) -> float:
    """``int_0^1 int kappa(s, y) (2 pi s |y|)^(-1/2) dy ds`` by nested adaptive quadrature.

    ``kappa`` must be bounded; used for the space-average limit weights.
    """
    lo, hi = y_range

    def half(a, b):
        if b <= a:
            return 0.0

        def inner(s):
            f = lambda u: kappa(s, np.sign(a + b) * u * u) * 2.0 / math.sqrt(2 * math.pi * s)
            ua, ub = math.sqrt(abs(a)) if np.isfinite(a) else 12.0, \
                math.sqrt(abs(b)) if np.isfinite(b) else 12.0
            ua, ub = min(ua, ub), max(ua, ub)
            return integrate.quad(f, ua, ub, epsabs=tol, epsrel=tol, limit=200)[0]
        return integrate.quad(lambda q: inner(q * q) * 2 * q, 0.0, 1.0,
                              epsabs=tol, epsrel=tol, limit=200)[0]

    # y = +-u^2 on each half-line removes |y|^(-1/2); s = q^2 removes s^(-1/2)
    return half(max(lo, 0.0), hi) + half(lo, min(hi, 0.0))


def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def local_time_second_moment(nodes: int = 64) -> float:
    """``E L_{0,1}^2`` by tensor quadrature over ``[0,1]^2 x R^2``.

    Opposite half-lines are independent, contributing ``(E L)^2 / 2``.  On a
    common half-line the joint density of ``(W(s,y), W(s',y'))`` at ``(0, 0)``
    is ``1 / (2 pi sqrt(det))`` with ``det`` vanishing only on the diagonal
    ``(s', y') = (s, y)``; the inner ``(s', y')`` integral is split along
    ``s' = s`` and ``y' = y`` so the singularity sits on panel edges, and
    every panel uses end-clustered nodes.  Coordinates are ``1 - s = v^2``,
    ``y = v w``, in which ``p^2_{1-s}(y) dy ds = e^{-w^2} dw dv / pi``.
    """
    n = int(nodes)
    x, wx = _gl01(n)
    cv, cvw = 0.5 * (1 - np.cos(np.pi * x)), 0.5 * np.pi * np.sin(np.pi * x) * wx
    sq, sqw = x * x, 2 * x * wx
    W = 7.0
    V, Wo = np.meshgrid(cv, W * sq, indexing="ij")
    Wt = np.outer(cvw, W * sqw) * np.exp(-Wo**2) / np.pi
    S, Y = 1 - V**2, V * Wo
    same = 0.0
    for s0, y0, v0, w0, wt0 in zip(S.ravel(), Y.ravel(), V.ravel(), Wo.ravel(), Wt.ravel()):
        acc = 0.0
        for va, vb in ((0.0, v0), (v0, 1.0)):
            later = va == 0.0  # v' < v  <=>  s' > s
            vp = va + (vb - va) * cv
            vpw = (vb - va) * cvw
            b = v0 * w0 / vp   # w' where y' = y
            sp = (1 - vp**2)[:, None]
            for below in (True, False):
                if below:
                    wp, wpw = b[:, None] * cv, b[:, None] * cvw
                else:
                    wp, wpw = b[:, None] + W * sq, np.broadcast_to(W * sqw, (n, n))
                yp = vp[:, None] * wp
                if below and later:
                    det = s0 * yp * (sp * y0 - s0 * yp)
                elif below:
                    det = sp * yp * (s0 * y0 - sp * yp)
                elif later:
                    det = s0 * y0 * (sp * yp - s0 * y0)
                else:
                    det = sp * y0 * (s0 * yp - sp * y0)
                f = 1.0 / (2 * np.pi * np.sqrt(np.maximum(det, 1e-300)))
                acc += np.sum(vpw[:, None] * wpw * np.exp(-wp**2) / np.pi * f)
        same += wt0 * acc
    el = _closed_form(1.0)
    # two same-sign half-line pairs plus the independent opposite-sign pairs
    return float(2.0 * same + el * el / 2.0)
