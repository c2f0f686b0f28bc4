"""Brownian sheet sampling on rectangular grids and Gaussian kernel utilities.

The sheet lives on ``[0, horizon] x [-y_max, y_max]``.  Cells are indexed
``(i, j)`` with ``i`` the time cell and ``j`` the space cell, space cells
ordered from ``-y_max`` to ``+y_max``; the node column ``n_space`` is
``y = 0``.  The two half-lines carry independent increment arrays that share
the time axis, so node values reproduce the covariance
``(s ^ t)(|x| ^ |y|) 1{xy > 0}`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Hard cap on nodes per sheet (float64 values + increments, ~3.2 GB).
MAX_NODES = 200_000_000

# Stream namespaces: sheets driving the solution and the independent sheets
# used by limit samplers never share a key.
NS_SOLUTION = 0
NS_LIMIT = 1
NS_AUX = 2


class CapacityError(MemoryError):
    """Raised when a grid would not fit the configured node budget."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization of ``[0, horizon] x [-y_max, y_max]``.

    With the default gradings the grid is uniform, ``ds = horizon / n_time``
    and ``dy = y_max / n_space``.  A grading ``g > 1`` places edges at
    ``(k / n) ** g`` (times horizon or y_max), clustering cells near ``s = 0``
    or ``y = 0`` where the sheet's variance degenerates.
    """

    n_time: int
    n_space: int
    y_max: float
    horizon: float = 1.0
    time_grading: float = 1.0
    space_grading: float = 1.0

    def __post_init__(self):
        if int(self.n_time) != self.n_time or self.n_time < 1:
            raise ValueError(f"n_time must be a positive integer, got {self.n_time!r}")
        if int(self.n_space) != self.n_space or self.n_space < 1:
            raise ValueError(f"n_space must be a positive integer, got {self.n_space!r}")
        if not (self.y_max > 0 and math.isfinite(self.y_max)):
            raise ValueError(f"y_max must be positive and finite, got {self.y_max!r}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")
        if self.time_grading < 1 or self.space_grading < 1:
            raise ValueError("gradings must be >= 1")
        nodes = (self.n_time + 1) * (2 * self.n_space + 1)
        if nodes > MAX_NODES:
            raise CapacityError(
                f"grid with {nodes} nodes exceeds the capacity of {MAX_NODES} nodes"
            )

    @classmethod
    def for_kernel(cls, variance: float, x_eval: float = 0.0, n_time: int = 512,
                   n_space: int = 512, horizon: float | None = None, **kw) -> "GridSpec":
        """Grid whose truncation ``|x_eval| + 6 sqrt(variance)`` loses < 1e-8 kernel mass."""
        y_max = abs(x_eval) + 6.0 * math.sqrt(variance)
        return cls(n_time, n_space, y_max, variance if horizon is None else horizon, **kw)

    @property
    def ds(self) -> float:
        return self.horizon / self.n_time

    @property
    def dy(self) -> float:
        return self.y_max / self.n_space

    @cached_property
    def time_edges(self) -> np.ndarray:
        k = np.arange(self.n_time + 1) / self.n_time
        edges = self.horizon * k**self.time_grading
        edges[-1] = self.horizon
        return edges

    @cached_property
    def half_edges(self) -> np.ndarray:
        """Nonnegative spatial edges ``0 = e_0 < ... < e_n = y_max``."""
        k = np.arange(self.n_space + 1) / self.n_space
        edges = self.y_max * k**self.space_grading
        edges[-1] = self.y_max
        return edges

    @cached_property
    def space_edges(self) -> np.ndarray:
        h = self.half_edges
        return np.concatenate([-h[:0:-1], h])

    @cached_property
    def inner_weights(self) -> np.ndarray:
        """Weight on the corner nearer ``y = 0`` when reading W inside a space cell.

        The read-out ``lam W(s, a) + (1 - lam) W(s, b)`` (``|a| < |b|``) has
        variance ``s (sqrt|a| + sqrt|b|)^2 / 4``, so its inverse square root
        equals the cell average of ``(s |y|)^(-1/2)``.  This keeps occupation
        functionals of W unbiased near ``y = 0``; ``lam = 1/2`` on the cells
        touching the origin.
        """
        e = self.space_edges
        a = np.minimum(np.abs(e[:-1]), np.abs(e[1:]))
        b = np.maximum(np.abs(e[:-1]), np.abs(e[1:]))
        q = 0.25 * (np.sqrt(a) + np.sqrt(b)) ** 2
        return 1.0 - np.sqrt((q - a) / (b - a))

    @cached_property
    def readout_variance(self) -> np.ndarray:
        """``Var`` of the per-cell read-out of :func:`cell_values`, ``s_i q_j``."""
        e = self.space_edges
        a = np.minimum(np.abs(e[:-1]), np.abs(e[1:]))
        b = np.maximum(np.abs(e[:-1]), np.abs(e[1:]))
        return np.outer(self.time_edges[:-1], 0.25 * (np.sqrt(a) + np.sqrt(b)) ** 2)

    @cached_property
    def subcell_variance(self) -> np.ndarray:
        """Typical variance of W inside a cell around its read-out.

        ``ds |y_c| / 2`` from the time direction plus ``s_c dy / 6`` from the
        bridge between the two spatial corners (``_c`` = cell centre).
        """
        te, e = self.time_edges, self.space_edges
        ds, dy = np.diff(te), np.diff(e)
        yc = np.abs(0.5 * (e[1:] + e[:-1]))
        return np.outer(ds, yc) / 2 + np.outer(te[:-1] + ds / 2, dy) / 6

    @cached_property
    def cell_areas(self) -> np.ndarray:
        return np.outer(np.diff(self.time_edges), np.diff(self.space_edges))

    def node_index(self, s: float, y: float) -> tuple[int, int]:
        """Indices of the node nearest to ``(s, y)``."""
        i = int(np.argmin(np.abs(self.time_edges - s)))
        j = int(np.argmin(np.abs(self.space_edges - y)))
        return i, j

    def as_dict(self) -> dict:
        return {
            "n_time": self.n_time,
            "n_space": self.n_space,
            "y_max": self.y_max,
            "horizon": self.horizon,
            "time_grading": self.time_grading,
            "space_grading": self.space_grading,
        }


def sheet_values(increments: np.ndarray, n_space: int) -> np.ndarray:
    """Node values from cell increments by rectangle summation.

    Works on a trailing ``(n_time, 2 * n_space)`` block, so a leading batch
    axis is allowed.  Summation order is fixed: cumulative sum over time,
    then outward from ``y = 0`` along each half-line.
    """
    inc = np.asarray(increments)
    *batch, nt, m = inc.shape
    if m != 2 * n_space:
        raise ValueError(f"expected {2 * n_space} space cells, got {m}")
    vals = np.zeros((*batch, nt + 1, m + 1), dtype=inc.dtype)
    cum_t = np.cumsum(inc, axis=-2)
    pos = np.cumsum(cum_t[..., n_space:], axis=-1)
    neg = np.cumsum(cum_t[..., n_space - 1::-1], axis=-1)
    vals[..., 1:, n_space + 1:] = pos
    vals[..., 1:, :n_space] = neg[..., ::-1]
    return vals


@dataclass(frozen=True, eq=False)
class SheetSample:
    """One Brownian sheet realization on ``grid``; treat as immutable."""

    grid: GridSpec
    increments: np.ndarray
    seed: int | tuple = 0
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = sheet_values(self.increments, self.grid.n_space)
        vals.flags.writeable = False
        self.increments.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def at(self, s: float, y: float) -> float:
        """W at the node nearest ``(s, y)``."""
        return float(self.values[self.grid.node_index(s, y)])

    def left_values(self) -> np.ndarray:
        """W read in each cell at its left time edge (see :func:`cell_values`)."""
        return cell_values(self.values, self.grid)


def cell_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Per-cell read-out of W at the left time edge, batched over leading axes.

    Combines the two left corners with :attr:`GridSpec.inner_weights`.  Only
    time ``s_i`` enters, so integrands built from it are predictable.
    """
    v = values[..., :-1, :]
    lam = grid.inner_weights
    n = grid.n_space
    # negative half: inner corner is the right one
    lo, hi = v[..., :-1], v[..., 1:]
    out = np.empty(v.shape[:-1] + (2 * n,), dtype=v.dtype)
    out[..., :n] = (1.0 - lam[:n]) * lo[..., :n] + lam[:n] * hi[..., :n]
    out[..., n:] = lam[n:] * lo[..., n:] + (1.0 - lam[n:]) * hi[..., n:]
    return out


def sheet_point(increments: np.ndarray, grid: GridSpec, s: float, y: float,
                rng: np.random.Generator) -> float:
    """Exact draw of ``W(s, y)`` at an off-grid point given the cell increments.

    A cell increment ``D`` over area ``A`` splits into a sub-rectangle of
    area fraction ``f`` carrying ``f D + N(0, A f (1 - f))`` independently of
    other cells.  ``W(s, y)`` is the sum of full cells below and to the left
    plus three such partial groups, so three normals from ``rng`` are used.
    """
    if not 0 <= s <= grid.horizon or abs(y) > grid.y_max:
        raise ValueError(f"({s}, {y}) lies outside the grid")
    z = rng.standard_normal(3)
    if s == 0 or y == 0:
        return 0.0
    n = grid.n_space
    te, he = grid.time_edges, grid.half_edges
    i = min(int(np.searchsorted(te, s, side="right")) - 1, grid.n_time - 1)
    j = min(int(np.searchsorted(he, abs(y), side="right")) - 1, n - 1)
    fa = (s - te[i]) / (te[i + 1] - te[i])
    fb = (abs(y) - he[j]) / (he[j + 1] - he[j])
    inc = np.asarray(increments)
    half = inc[:, n:] if y > 0 else inc[:, n - 1::-1]
    area = grid.cell_areas[:, n:]
    full = float(np.sum(half[:i, :j]))
    row, col, corner = half[i, :j], half[:i, j], half[i, j]
    val = full + fa * float(np.sum(row)) + fb * float(np.sum(col)) + fa * fb * corner
    var = (fa * (1 - fa) * float(np.sum(area[i, :j])),
           fb * (1 - fb) * float(np.sum(area[:i, j])),
           fa * fb * (1 - fa * fb) * area[i, j])
    return float(val + sum(math.sqrt(v) * zk for v, zk in zip(var, z)))


def rng_stream(master_seed: int, replicate_index: int, namespace: int = NS_SOLUTION
               ) -> np.random.Generator:
    """Independent reproducible generator for one replicate.

    Built from ``numpy.random.SeedSequence(master_seed, spawn_key=(namespace,
    replicate_index))`` feeding PCG64.  SeedSequence hashes the full key, so
    distinct ``(namespace, index)`` pairs give statistically independent
    streams and the same key always replays the same sequence.
    """
    ss = np.random.SeedSequence(int(master_seed) % 2**64,
                                spawn_key=(int(namespace), int(replicate_index)))
    return np.random.Generator(np.random.PCG64(ss))


def draw_increments(grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """Independent ``N(0, cell area)`` increments, shape ``(n_time, 2 n_space)``."""
    try:
        z = rng.standard_normal((grid.n_time, 2 * grid.n_space))
    except MemoryError as exc:  # pragma: no cover - depends on host
        raise CapacityError(f"cannot allocate increments for {grid}") from exc
    z *= np.sqrt(grid.cell_areas)
    return z


def sample_sheet(grid: GridSpec, seed: int | np.random.Generator,
                 namespace: int = NS_SOLUTION) -> SheetSample:
    """Sample a sheet; an integer seed means replicate 0 of that master seed."""
    if isinstance(seed, np.random.Generator):
        rng, tag = seed, -1
    else:
        rng, tag = rng_stream(seed, 0, namespace), int(seed)
    return SheetSample(grid, draw_increments(grid, rng), tag)


def sample_sheets(grid: GridSpec, master_seed: int, indices, namespace: int = NS_SOLUTION
                  ) -> np.ndarray:
    """Stacked increments for several replicates, one stream per replicate."""
    return np.stack([draw_increments(grid, rng_stream(master_seed, k, namespace))
                     for k in indices])


def sheet_covariance(s: float, x: float, t: float, y: float) -> float:
    """``E[W(s, x) W(t, y)] = (s ^ t)(|x| ^ |y|) 1{xy > 0}``."""
    if s < 0 or t < 0:
        raise ValueError("time arguments must be nonnegative")
    if x * y <= 0:
        return 0.0
    return min(s, t) * min(abs(x), abs(y))


def heat_kernel(t, x):
    """``p_t(x) = (2 pi t)^(-1/2) exp(-x^2 / (2t))``; vectorized over arrays."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("heat kernel needs t > 0")
    out = np.exp(-np.square(x) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out
