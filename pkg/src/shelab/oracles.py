"""Deterministic variance oracles for the Monte Carlo experiments.

Every Walsh integral ``int int g(s, y) phi(W(s, y)) W(ds, dy)`` with a
deterministic kernel ``g`` has second moment

    int int g(s, y)^2 E phi^2(N(0, s|y|)) dy ds,

so variances reduce to two-dimensional quadratures of the kernel against
``m(v) = E phi^2(N(0, v))`` (``PhiSpec.second_moment``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gamma, ndtr

from . import local_time
from .phi import PhiSpec

_TOL = 1e-10


def heat_sq_variance(phi: PhiSpec, t: float, x: float = 0.0, tol: float = _TOL) -> float:
    """``E u(t, x)^2 = int_0^t int p^2_{t-s}(x - y) E phi^2(W(s, y)) dy ds``.

    With ``t - s = v^2`` and ``y = x + v w`` the kernel measure becomes
    ``e^{-w^2} dw dv / pi``; ``v = sqrt(t) sin(theta)`` tames ``s -> 0`` and
    ``w = w0 +- u^2`` (``w0`` where ``y = 0``) tames ``|y| -> 0``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if phi.kind == "constant":
        return phi.params[0] ** 2 * math.sqrt(t / math.pi)
    rt = math.sqrt(t)

    def m(var):
        return float(phi.second_moment(max(var, 0.0)))

    def inner(theta):
        v = rt * math.sin(theta)
        s = t - v * v
        if v == 0.0:
            return m(s * abs(x)) * math.sqrt(math.pi) / math.pi
        w0 = -x / v
        f = lambda u, sg: math.exp(-(w0 + sg * u * u) ** 2) / math.pi * 2 * u \
            * m(s * abs(x + v * (w0 + sg * u * u)))
        a = integrate.quad(f, 0.0, 8.0, args=(1.0,), epsabs=tol, epsrel=tol, limit=200)[0]
        b = integrate.quad(f, 0.0, 8.0, args=(-1.0,), epsabs=tol, epsrel=tol, limit=200)[0]
        return (a + b) * rt * math.cos(theta)

    return integrate.quad(inner, 0.0, math.pi / 2, epsabs=tol, epsrel=tol, limit=200)[0]


def interval_kernel_variance(phi: PhiSpec, t: float, R: float, tol: float = 1e-9) -> float:
    """``E u_R(t)^2`` with ``K = Phi((R-y)/sqrt(t-s)) - Phi((-R-y)/sqrt(t-s))``."""
    if not (t > 0 and R > 0):
        raise ValueError("t and R must be positive")

    def f(y, s):
        tau = t - s
        K = ndtr((R - y) / math.sqrt(tau)) - ndtr((-R - y) / math.sqrt(tau))
        return K * K * float(phi.second_moment(s * abs(y)))

    reach = R + 10 * math.sqrt(t)
    # the integrand is even in y; split at 0 and at the kernel edge R
    total = 0.0
    for a, b in ((0.0, R), (R, reach)):
        total += integrate.dblquad(f, 0.0, t, a, b, epsabs=tol, epsrel=tol)[0]
    return 2.0 * total


def chaos_variance(n: int, t: float) -> float:
    """``E I_n^2 = (t/4)^(n/2) / Gamma(n/2 + 1)`` for the linear equation started at 1.

    Follows from ``int p^2_tau(y) dy = (4 pi tau)^(-1/2)`` and the Dirichlet
    integral over the time simplex.
    """
    if n < 0 or int(n) != n:
        raise ValueError("n must be a nonnegative integer")
    return (t / 4.0) ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def chaos_variance_quadrature(n: int, t: float, tol: float = 1e-11) -> float:
    """``E I_n^2`` by nested adaptive quadrature over the time simplex.

    Space is integrated first, one kernel at a time, leaving
    ``int_{0<s_n<...<s_1<t} prod (4 pi (s_{k-1} - s_k))^(-1/2) ds`` with
    ``s_0 = t``; each layer is a 1D adaptive integral with the algebraic
    end weight on its ``(upper - s)^(-1/2)`` factor.
    """
    if n == 0:
        return 1.0

    def layer(k, upper):
        # integral over s_k in (0, upper) of (4 pi (upper - s))^(-1/2) * rest(s)
        if k == n:
            return math.sqrt(upper / math.pi)
        g = lambda s: layer(k + 1, s) / math.sqrt(4 * math.pi)
        return integrate.quad(g, 0.0, upper, weight="alg", wvar=(0.0, -0.5),
                              epsabs=tol, epsrel=tol)[0]

    return layer(1, float(t))


def power_moment(alpha: float) -> float:
    """``E |Z|^(2 alpha) = 2^alpha Gamma(alpha + 1/2) / sqrt(pi)``."""
    return 2**alpha * gamma(alpha + 0.5) / math.sqrt(math.pi)


def thm12_variance(alpha: float, c_plus: float, c_minus: float) -> float:
    """Variance of the homogeneous-coefficient limit (unit time, ``x = 0``)."""
    return heat_sq_variance(PhiSpec.power(alpha, c_plus, c_minus), 1.0, 0.0)


def thm31_variance(regime: str, alpha: float, c: float | None = None) -> float:
    """Variances of the space-average limits for ``phi = |x|^alpha``."""
    phi = PhiSpec.power(alpha, 1.0, 1.0)
    if regime == "i":
        return interval_kernel_variance(phi, 1.0, float(c))
    if regime == "ii":
        return 4.0 * heat_sq_variance(phi, 1.0, 0.0)
    if regime == "iii":
        # int_0^1 s^a ds * int_{-1}^{1} |y|^a dy
        return power_moment(alpha) * 2.0 / (alpha + 1.0) ** 2
    raise ValueError(f"unknown regime {regime!r}")


def thm32_variance(regime: str, phi: PhiSpec, c: float | None = None) -> float:
    """Variances of the mixed-Gaussian space-average limits, as stated.

    ``(i)`` uses the squared interval kernel, ``(ii)`` twice the point-kernel
    local time, ``(iii)`` twice the point-kernel local time restricted to
    ``|y| <= 1``.
    """
    n2 = phi.require_l2()
    if regime == "i":
        c = float(c)

        def kappa(s, y):
            if s >= 1.0:
                return float(abs(y) <= c)
            K = ndtr((c - y) / math.sqrt(1 - s)) - ndtr((-c - y) / math.sqrt(1 - s))
            return K * K
        return n2 * local_time.expected_weighted_occupation(kappa)
    if regime == "ii":
        return 2.0 * n2 * local_time.expected_local_time(1.0)
    if regime == "iii":
        p2 = lambda s, y: (math.exp(-y * y / (1 - s)) / (2 * math.pi * (1 - s))) if s < 1 else 0.0
        return 2.0 * n2 * local_time.expected_weighted_occupation(p2, (-1.0, 1.0))
    raise ValueError(f"unknown regime {regime!r}")


def thm13_variance(phi: PhiSpec) -> float:
    return phi.require_l2() * local_time.expected_local_time(1.0)


def thm13_fourth_moment(phi: PhiSpec, nodes: int = 64) -> float:
    """``E F^4 = 3 ||phi||^4 E L^2`` for ``F = Z sqrt(L) ||phi||``."""
    return 3.0 * phi.require_l2() ** 2 * local_time.local_time_second_moment(nodes)
