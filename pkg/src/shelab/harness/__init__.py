"""Reproducible experiment campaigns: config in, JSON record plus CSV and Markdown out."""

from __future__ import annotations

import json
import os
import time

import numpy as np

from .. import __version__
from .cache import OracleCache
from .config import ConfigError, ExperimentConfig, build, load
from .experiments import EXPERIMENT_TITLES, EXPERIMENTS, Context, Runner
from .report import any_failed, write_outputs

__all__ = ["ConfigError", "ExperimentConfig", "OracleCache", "build", "load", "run",
           "save_record"]


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def run(cfg: ExperimentConfig, cache: OracleCache | None = None) -> dict:
    """Run one experiment and return its result record (not yet persisted)."""
    cache = cache or OracleCache(None)
    t0 = time.perf_counter()
    with Runner(cfg.workers, cfg.opt("chunk")) as runner:
        ctx = Context(cfg, runner, cache)
        EXPERIMENTS[cfg.experiment](ctx)
    rec = {
        "experiment": cfg.experiment,
        "title": EXPERIMENT_TITLES[cfg.experiment],
        "exploratory": cfg.experiment == "nonlinear_rate_probe",
        "version": __version__,
        "digest": cfg.digest(),
        "config": cfg.as_dict(),
        "cells": ctx.cells,
        "verdicts": ctx.verdicts,
        "oracles": ctx.oracles,
        "info": ctx.info,
        "errors": ctx.errors,
        "complete": not ctx.errors,
        "wall_clock": time.perf_counter() - t0,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return _plain(rec)


def save_record(rec: dict, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "record.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rec, fh, indent=1, allow_nan=True)
    write_outputs(rec, out_dir)
    return path


def passed(rec: dict) -> bool:
    return not any_failed(rec)
