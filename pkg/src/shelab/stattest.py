"""Statistical checks on Monte Carlo batches.

Empirical characteristic functions, the stable-convergence factorization
test, two-sample Kolmogorov-Smirnov distances, SE-aware moment checks and
power-law rate fits.  All reports serialize to plain JSON-compatible dicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

DEFAULT_LAMBDAS = np.linspace(-5.0, 5.0, 21)


@dataclass(frozen=True, eq=False)
class McBatch:
    """A batch of scalar Monte Carlo samples with summary statistics."""

    values: np.ndarray
    label: str = ""
    seed: int | None = None
    lineage: tuple = ()
    n: int = field(init=False)
    mean: float = field(init=False)
    variance: float = field(init=False)
    stderr: float = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError(f"a batch needs n >= 2 samples, got {v.size}")
        v.flags.writeable = False
        var = float(np.var(v, ddof=1))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n", int(v.size))
        object.__setattr__(self, "mean", float(np.mean(v)))
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "stderr", math.sqrt(var / v.size))

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def variance_se(self) -> float:
        """Standard error of the sample variance, ``sd((X - mean)^2) / sqrt(n)``."""
        c = (self.values - self.mean) ** 2
        return float(np.std(c, ddof=1) / math.sqrt(self.n))

    def summary(self) -> dict:
        return {"label": self.label, "n": self.n, "mean": self.mean, "variance": self.variance,
                "sd": self.sd, "stderr": self.stderr, "variance_se": self.variance_se,
                "seed": self.seed, "lineage": list(self.lineage)}


def ecf(batch: McBatch | np.ndarray, lambdas) -> np.ndarray:
    """Empirical characteristic function ``(1/n) sum_k exp(i lam v_k)`` per ``lam``."""
    v = batch.values if isinstance(batch, McBatch) else np.asarray(batch, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty batch")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    out = _mean_phase(np.ones(1), lam, v)
    # guard the last ulp so |ecf| <= 1 holds exactly
    big = np.abs(out) > 1.0
    out[big] /= np.abs(out[big])
    return out


def _mean_phase(g: np.ndarray, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
    # cos/sin rather than exp(1j x) keeps |.| <= 1 and ecf(-lam) = conj(ecf(lam)) exact
    ph = np.outer(lam, v)
    z = np.cos(ph) + 1j * np.sin(np.abs(ph)) * np.sign(ph)
    if g.size > 1:
        z = g[None, :] * z
    return z.mean(axis=1)


@dataclass(frozen=True)
class StableTestReport:
    lambda_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_abs_gap: float
    mc_error_bound: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return self.max_abs_gap <= self.threshold * self.mc_error_bound

    def to_dict(self) -> dict:
        return {
            "lambda_grid": self.lambda_grid.tolist(),
            "lhs": [[z.real, z.imag] for z in self.lhs],
            "rhs": [[z.real, z.imag] for z in self.rhs],
            "max_abs_gap": self.max_abs_gap,
            "mc_error_bound": self.mc_error_bound,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def _gaps(g, f, lim, lam):
    lhs = _mean_phase(g, lam, f)
    rhs = np.mean(g) * _mean_phase(np.ones(1), lam, lim)
    return lhs, rhs


def stable_test(g_values, f_values, limit_batch: McBatch | np.ndarray, lambdas=None,
                n_boot: int = 200, seed: int = 0, threshold: float = 3.0) -> StableTestReport:
    """Compare ``E[G e^{i lam F}]`` with ``E[G] E[e^{i lam X}]`` on a lambda grid.

    ``G`` must be bounded by 1 and computed on the same sheet as ``F``; ``X``
    is a batch from the limit law on independent randomness.  The MC error
    bound is the bootstrap standard deviation of the max-over-lambda gap
    deviation, resampling ``(G, F)`` pairs and the limit batch jointly.
    """
    g = np.asarray(g_values, dtype=complex).ravel()
    f = np.asarray(f_values, dtype=float).ravel()
    if g.size != f.size:
        raise ValueError(f"G and F batches differ in size ({g.size} vs {f.size})")
    if g.size < 2:
        raise ValueError("need at least two (G, F) pairs")
    if np.any(np.abs(g) > 1.0 + 1e-12):
        raise ValueError("the conditioning functional must satisfy |G| <= 1")
    lim = limit_batch.values if isinstance(limit_batch, McBatch) \
        else np.asarray(limit_batch, dtype=float).ravel()
    lam = DEFAULT_LAMBDAS if lambdas is None else np.atleast_1d(np.asarray(lambdas, float))
    lhs, rhs = _gaps(g, f, lim, lam)
    d0 = lhs - rhs
    rng = np.random.default_rng(seed)
    dev = np.empty(n_boot)
    for b in range(n_boot):
        i = rng.integers(0, f.size, f.size)
        j = rng.integers(0, lim.size, lim.size)
        lb, rb = _gaps(g[i], f[i], lim[j], lam)
        dev[b] = np.max(np.abs((lb - rb) - d0))
    return StableTestReport(lam, lhs, rhs, float(np.max(np.abs(d0))),
                            float(np.sqrt(np.mean(dev**2))), threshold)


def ks_distance(a: McBatch | np.ndarray, b: McBatch | np.ndarray) -> tuple[float, float]:
    """Two-sample KS statistic ``D`` and its asymptotic p-value.

    ``p = Q_KS((sqrt(n_e) + 0.12 + 0.11 / sqrt(n_e)) D)`` with
    ``n_e = n m / (n + m)`` and ``Q_KS`` the Kolmogorov survival function
    (Stephens' small-sample correction).
    """
    x = a.values if isinstance(a, McBatch) else np.asarray(a, dtype=float).ravel()
    y = b.values if isinstance(b, McBatch) else np.asarray(b, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("empty batch")
    d = float(stats.ks_2samp(x, y, method="asymp").statistic)
    ne = x.size * y.size / (x.size + y.size)
    rt = math.sqrt(ne)
    return d, float(stats.kstwobign.sf((rt + 0.12 + 0.11 / rt) * d))


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    r_squared: float
    points: tuple
    exponent_se: float = float("nan")

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept,
                "r_squared": self.r_squared, "exponent_se": self.exponent_se,
                "points": [list(p) for p in self.points]}


def rate_fit(pairs) -> RateFit:
    """OLS of ``log sd`` on ``log t``; the slope is the growth exponent."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("rate_fit needs at least three (t, sd) pairs")
    t, sd = arr[:, 0], arr[:, 1]
    if np.any(t <= 0) or np.any(sd <= 0):
        raise ValueError("t and sd must be positive")
    if np.unique(t).size != t.size:
        raise ValueError("t values must be distinct")
    x, y = np.log(t), np.log(sd)
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    ss_res, ss_tot = float(resid @ resid), float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFit(float(res.slope), float(res.intercept), r2,
                   tuple(zip(x.tolist(), y.tolist())), float(res.stderr))


def moment_report(batch: McBatch, targets) -> list[dict]:
    """Check raw moments ``E X^k`` against ``(order, value, n_se)`` targets.

    The tolerance is ``n_se`` standard errors of the empirical moment,
    ``sd(X^k) / sqrt(n)``.
    """
    out = []
    for order, value, n_se in targets:
        if order not in (1, 2, 3, 4):
            raise ValueError(f"moment order must be in 1..4, got {order}")
        p = batch.values**order
        est = float(np.mean(p))
        se = float(np.std(p, ddof=1) / math.sqrt(batch.n))
        out.append({"order": int(order), "target": float(value), "estimate": est, "stderr": se,
                    "n_se": float(n_se), "z": (est - value) / se if se > 0 else 0.0,
                    "passed": abs(est - value) <= n_se * se})
    return out
