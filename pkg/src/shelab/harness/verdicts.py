"""Verdict records and the rules that decide them.

A verdict stores every number its rule reads, so :func:`decide` can recompute
PASS/FAIL from a persisted record without re-simulation.
"""

from __future__ import annotations

import math

KINDS = ("within_se", "combined_se", "ks", "stable", "stable_power", "rate", "decreasing",
         "below", "info")


def decide(kind: str, f: dict) -> bool | None:
    if kind == "within_se":
        return abs(f["value"] - f["oracle"]) <= f["n_se"] * f["se"]
    if kind == "combined_se":
        return abs(f["value"] - f["oracle"]) <= f["n_se"] * math.hypot(f["se"], f["oracle_se"])
    if kind == "ks":
        return f["p_value"] > f["alpha"]
    if kind == "stable":
        return f["max_abs_gap"] <= f["threshold"] * f["mc_error_bound"]
    if kind == "stable_power":
        # the designed dependent construction must be rejected
        return f["max_abs_gap"] > f["threshold"] * f["mc_error_bound"]
    if kind == "rate":
        return abs(f["value"] - f["oracle"]) <= f["tolerance"]
    if kind == "decreasing":
        v = f["values"]
        return all(b < a for a, b in zip(v, v[1:]))
    if kind == "below":
        return f["value"] < f["bound"]
    if kind == "info":
        return None
    raise ValueError(f"unknown verdict kind {kind!r}")


def verdict(name: str, kind: str, cell: int | None = None, note: str = "", **fields) -> dict:
    fields = {k: (float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v)
              for k, v in fields.items()}
    return {"name": name, "kind": kind, "cell": cell, "note": note, "fields": fields,
            "passed": decide(kind, fields)}


def label(v: dict) -> str:
    if v["passed"] is None:
        return "INFO"
    return "PASS" if v["passed"] else "FAIL"
