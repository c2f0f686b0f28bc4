"""Catalog of coefficient functions phi (or sigma) with their known norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, ndtr

# probabilists' Gauss-Hermite rule for expectations over N(0, 1)
_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(80)
_GH_W = _GH_W / math.sqrt(2 * math.pi)


class PreconditionError(ValueError):
    """An operation was called with a coefficient outside its domain."""


KINDS = ("constant", "power", "gaussian_bump", "indicator", "table")


@dataclass(frozen=True)
class PhiSpec:
    """A coefficient function.

    Build instances through the constructors below rather than directly:
    :meth:`constant`, :meth:`power`, :meth:`gaussian_bump`, :meth:`indicator`
    and :meth:`table`.
    """

    kind: str
    params: tuple = ()
    l2_norm_sq: float | None = None
    lp_exponent: float | None = None
    _table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phi kind {self.kind!r}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float = 1.0) -> "PhiSpec":
        return cls("constant", (float(c),), 0.0 if c == 0 else None)

    @classmethod
    def power(cls, alpha: float, c_plus: float = 1.0, c_minus: float = 1.0) -> "PhiSpec":
        """``c_+ |x|^alpha`` for ``x > 0`` and ``c_- |x|^alpha`` for ``x < 0``."""
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        zero = c_plus == 0 and c_minus == 0
        return cls("power", (float(alpha), float(c_plus), float(c_minus)),
                   0.0 if zero else None)

    @classmethod
    def gaussian_bump(cls, scale: float = 1.0) -> "PhiSpec":
        """``scale * exp(-x^2 / 2)``; squared L2 norm ``scale^2 sqrt(pi)``."""
        return cls("gaussian_bump", (float(scale),), scale**2 * math.sqrt(math.pi), 1.0)

    @classmethod
    def indicator(cls, a: float, b: float, scale: float = 1.0) -> "PhiSpec":
        if not b > a:
            raise ValueError("indicator needs a < b")
        return cls("indicator", (float(a), float(b), float(scale)), scale**2 * (b - a), 1.0)

    @classmethod
    def table(cls, x, y) -> "PhiSpec":
        """Piecewise-linear interpolation of samples, constant beyond the ends."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("table needs matching 1D samples with increasing x")
        # finite L2 norm only if the flat extrapolation is zero on both sides
        l2 = None
        if y[0] == 0 and y[-1] == 0:
            l2 = float(_piecewise_linear_sq_integral(x, y))
        return cls("table", (len(x),), l2, None, (tuple(x), tuple(y)))

    # -- evaluation -------------------------------------------------------
    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "constant":
            return np.full_like(w, self.params[0])
        if self.kind == "power":
            alpha, cp, cm = self.params
            mag = np.abs(w) ** alpha if alpha != 0 else np.ones_like(w)
            # at w = 0 the alpha = 0 case takes the mean of the two sides
            at_zero = 0.5 * (cp + cm) if alpha == 0 else 0.0
            return np.where(w > 0, cp, np.where(w < 0, cm, at_zero)) * mag
        if self.kind == "gaussian_bump":
            return self.params[0] * np.exp(-0.5 * w * w)
        if self.kind == "indicator":
            a, b, scale = self.params
            return np.where((w >= a) & (w <= b), scale, 0.0)
        xs, ys = self._table
        return np.interp(w, xs, ys)

    def smoothed_square(self, z, a):
        """``E phi^2(z + sqrt(a) Z)`` for ``Z ~ N(0, 1)``; ``a >= 0`` broadcasts with ``z``.

        Closed forms where available, else 80-node Gauss-Hermite (relative
        error below 1e-3 for kinked tables and fractional powers).
        """
        z, a = np.broadcast_arrays(np.asarray(z, float), np.asarray(a, float))
        if self.kind == "constant":
            return np.full(z.shape, self.params[0] ** 2)
        if self.kind == "gaussian_bump":
            d = 1.0 + 2.0 * a
            return self.params[0] ** 2 * np.exp(-z * z / d) / np.sqrt(d)
        if self.kind == "indicator":
            lo, hi, scale = self.params
            sd = np.sqrt(a)
            with np.errstate(divide="ignore", invalid="ignore"):
                p = ndtr((hi - z) / sd) - ndtr((lo - z) / sd)
            inside = ((z >= lo) & (z <= hi)).astype(float)
            return scale**2 * np.where(sd > 0, p, inside)
        if self.kind == "power" and self.params[0] in (0.0, 1.0):
            alpha, cp, cm = self.params
            sd = np.sqrt(a)
            pos = sd > 0
            r = np.where(z > 0, np.inf, np.where(z < 0, -np.inf, 0.0))
            np.divide(z, sd, out=r, where=pos)
            up, dn = ndtr(r), ndtr(-r)
            if alpha == 0.0:
                at0 = (z == 0) & ~pos
                return np.where(at0, (0.5 * (cp + cm)) ** 2, cp * cp * up + cm * cm * dn)
            # E (z + sd Z)^2 restricted to each half-line
            m2 = z * z + a
            dens = np.exp(-0.5 * np.where(pos, r, 0.0) ** 2) / math.sqrt(2 * math.pi)
            cross = np.where(pos, z * sd * dens, 0.0)
            return cp * cp * (m2 * up + cross) + cm * cm * (m2 * dn - cross)
        # accumulate node by node so memory stays at the size of z
        sd = np.sqrt(a)
        out = np.zeros(z.shape)
        for xk, wk in zip(_GH_X, _GH_W):
            out += wk * self(z + sd * xk) ** 2
        return out

    def second_moment(self, var):
        """``E phi^2(N(0, var))``."""
        var = np.asarray(var, float)
        if self.kind == "power":
            alpha, cp, cm = self.params
            c2 = 0.5 * (cp * cp + cm * cm)
            return c2 * 2**alpha * gamma(alpha + 0.5) / math.sqrt(math.pi) * var**alpha
        return self.smoothed_square(np.zeros_like(var), var)

    def scaled(self, k: float) -> "PhiSpec":
        """``k * phi``."""
        if self.kind == "constant":
            return PhiSpec.constant(k * self.params[0])
        if self.kind == "power":
            a, cp, cm = self.params
            return PhiSpec.power(a, k * cp, k * cm)
        if self.kind == "gaussian_bump":
            return PhiSpec.gaussian_bump(k * self.params[0])
        if self.kind == "indicator":
            a, b, s = self.params
            return PhiSpec.indicator(a, b, k * s)
        xs, ys = self._table
        return PhiSpec.table(xs, k * np.asarray(ys))

    # -- properties used by preconditions ---------------------------------
    @property
    def is_zero(self) -> bool:
        return self.l2_norm_sq == 0.0

    @property
    def l2_norm(self) -> float:
        return math.sqrt(self.require_l2())

    def require_l2(self) -> float:
        if self.l2_norm_sq is None:
            raise PreconditionError(f"{self.label()} has no finite L2 norm")
        return self.l2_norm_sq

    def lipschitz_constant(self) -> float:
        """Lipschitz constant, or ``inf`` for non-Lipschitz coefficients."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "gaussian_bump":
            return abs(self.params[0]) * math.exp(-0.5)
        if self.kind == "power":
            alpha, cp, cm = self.params
            if cp == 0 and cm == 0:
                return 0.0
            if alpha == 1:
                return max(abs(cp), abs(cm))
            return math.inf
        if self.kind == "indicator":
            return math.inf
        xs, ys = self._table
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))

    def label(self) -> str:
        if self.kind == "table":
            return f"table[{self.params[0]}]"
        return f"{self.kind}{self.params}"

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "params": list(self.params)}
        if self.kind == "table":
            d["x"], d["y"] = map(list, self._table)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhiSpec":
        kind = d["kind"]
        p = d.get("params", [])
        if kind == "constant":
            return cls.constant(*p)
        if kind == "power":
            return cls.power(*p)
        if kind == "gaussian_bump":
            return cls.gaussian_bump(*p)
        if kind == "indicator":
            return cls.indicator(*p)
        if kind == "table":
            return cls.table(d["x"], d["y"])
        raise ValueError(f"unknown phi kind {kind!r}")


def _piecewise_linear_sq_integral(x, y):
    # exact integral of the square of a linear interpolant
    h = np.diff(x)
    a, b = y[:-1], y[1:]
    return np.sum(h * (a * a + a * b + b * b) / 3.0)


def one_minus_bump(width: float = 10.0, n: int = 401) -> PhiSpec:
    """``1 - exp(-x^2/2)`` tabulated on ``[-width, width]``, flat 1 beyond.

    A non-constant coefficient with ``c_+ = c_- = 1`` and ``alpha = 0``.
    """
    x = np.linspace(-width, width, n)
    return PhiSpec.table(x, 1.0 - np.exp(-0.5 * x * x))


def parse_phi(text: str) -> PhiSpec:
    """Parse ``constant:1``, ``power:1,1,1``, ``gaussian_bump``, ``indicator:0,1``."""
    name, _, args = text.strip().partition(":")
    vals = [float(a) for a in args.split(",") if a.strip()]
    name = name.strip().lower()
    if name == "constant":
        return PhiSpec.constant(*vals)
    if name == "power":
        return PhiSpec.power(*vals)
    if name in ("gaussian_bump", "gaussian"):
        return PhiSpec.gaussian_bump(*vals)
    if name == "indicator":
        return PhiSpec.indicator(*vals)
    if name == "one_minus_bump":
        return one_minus_bump(*vals)
    raise ValueError(f"cannot parse phi {text!r}")
