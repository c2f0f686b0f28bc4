"""Persistent JSON cache of deterministic oracle values.

Entries are keyed by ``(op, params, tol)``; a value computed at one tolerance
is never served for another.  A corrupt cache file is set aside with a
warning and rebuilt.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings

from .. import local_time, oracles
from ..phi import PhiSpec, parse_phi

DEFAULT_TOL = 1e-9


def _phi(v) -> PhiSpec:
    if isinstance(v, PhiSpec):
        return v
    if isinstance(v, dict):
        return PhiSpec.from_dict(v)
    return parse_phi(str(v))


def _opt(v):
    return None if v in (None, "", "none") else float(v)


# op name -> (callable(params, tol), parameter names)
REGISTRY = {
    "expected_local_time": (lambda p, tol: local_time.expected_local_time(float(p.get("r", 1.0))),
                            ("r",)),
    "expected_smoothed_local_time": (
        lambda p, tol: local_time.expected_smoothed_local_time(float(p["epsilon"]),
                                                               float(p.get("r", 1.0))),
        ("epsilon", "r")),
    "local_time_second_moment": (
        lambda p, tol: local_time.local_time_second_moment(int(p.get("nodes", 64))), ("nodes",)),
    "chaos_variance": (lambda p, tol: oracles.chaos_variance(int(p["n"]), float(p["t"])),
                       ("n", "t")),
    "chaos_variance_quadrature": (
        lambda p, tol: oracles.chaos_variance_quadrature(int(p["n"]), float(p["t"]), tol),
        ("n", "t")),
    "heat_sq_variance": (
        lambda p, tol: oracles.heat_sq_variance(_phi(p["phi"]), float(p["t"]),
                                                float(p.get("x", 0.0)), tol),
        ("phi", "t", "x")),
    "interval_kernel_variance": (
        lambda p, tol: oracles.interval_kernel_variance(_phi(p["phi"]), float(p["t"]),
                                                        float(p["R"]), tol),
        ("phi", "t", "R")),
    "thm12_variance": (
        lambda p, tol: oracles.thm12_variance(float(p["alpha"]), float(p.get("c_plus", 1)),
                                              float(p.get("c_minus", 1))),
        ("alpha", "c_plus", "c_minus")),
    "thm13_variance": (lambda p, tol: oracles.thm13_variance(_phi(p["phi"])), ("phi",)),
    "thm13_fourth_moment": (lambda p, tol: oracles.thm13_fourth_moment(_phi(p["phi"])), ("phi",)),
    "thm31_variance": (
        lambda p, tol: oracles.thm31_variance(str(p["regime"]), float(p["alpha"]), _opt(p.get("c"))),
        ("regime", "alpha", "c")),
    "thm32_variance": (
        lambda p, tol: oracles.thm32_variance(str(p["regime"]), _phi(p["phi"]), _opt(p.get("c"))),
        ("regime", "phi", "c")),
}


def _canon(v):
    if isinstance(v, PhiSpec):
        return v.as_dict()
    if isinstance(v, float) and v.is_integer():
        return v
    return v


class OracleCache:
    """``get(op, params, tol)`` returns ``(value, hit)``; misses are computed and persisted."""

    def __init__(self, path: str | None):
        self.path = path
        self.entries: dict = {}
        self.hits = 0
        self.misses = 0
        if path and os.path.exists(path):
            try:
                with open(path, encoding="utf-8") as fh:
                    data = json.load(fh)
                if not isinstance(data, dict):
                    raise ValueError("cache root is not an object")
                self.entries = data
            except (OSError, ValueError) as exc:
                warnings.warn(f"oracle cache {path} is corrupt ({exc}); recomputing",
                              RuntimeWarning, stacklevel=2)
                self.entries = {}

    @staticmethod
    def key(op: str, params: dict, tol: float) -> str:
        p = {k: _canon(v) for k, v in sorted(params.items())}
        return json.dumps([op, p, float(tol)], sort_keys=True)

    def get(self, op: str, params: dict | None = None, tol: float = DEFAULT_TOL
            ) -> tuple[float, bool]:
        if op not in REGISTRY:
            raise KeyError(f"unknown oracle {op!r}; known: {', '.join(sorted(REGISTRY))}")
        params = dict(params or {})
        k = self.key(op, params, tol)
        hit = self.entries.get(k)
        if isinstance(hit, dict) and isinstance(hit.get("value"), (int, float)):
            self.hits += 1
            return float(hit["value"]), True
        value = float(REGISTRY[op][0](params, tol))
        self.misses += 1
        self.entries[k] = {"op": op, "params": {a: _canon(b) for a, b in params.items()},
                           "tol": float(tol), "value": value}
        self.save()
        return value, False

    def value(self, op: str, params: dict | None = None, tol: float = DEFAULT_TOL) -> float:
        return self.get(op, params, tol)[0]

    def save(self):
        if not self.path:
            return
        d = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(self.entries, fh, indent=1, sort_keys=True)
        os.replace(tmp, self.path)

    def clear(self):
        self.entries = {}
        if self.path and os.path.exists(self.path):
            os.remove(self.path)
