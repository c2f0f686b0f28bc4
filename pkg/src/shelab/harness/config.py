"""Experiment configuration: a single key-value file.

Schema (``#`` starts a comment; an optional ``[experiment]`` header is allowed)::

    experiment = variance_check     # see EXPERIMENTS
    phi        = constant:1         # shelab.phi.parse_phi syntax; ';' separates several
    t          = 1, 4, 16           # strictly increasing ladder
    n          = 100000             # replicates per ladder cell
    seed       = 2024
    workers    = 4
    grid       = 512x512            # n_time x n_space on the unit interval
    y_pad      = 6                  # y_max = (|x| + R) / sqrt(t) + y_pad
    out        = results/run1

Experiment-specific keys (defaults in ``DEFAULTS``): ``x``, ``alpha``,
``c_plus``, ``c_minus``, ``regime``, ``coupling`` (``c=1`` for ``R = c sqrt t``
or ``beta=0.25`` for ``R = t^beta``), ``orders``, ``epsilons``, ``integrand``,
``sampler``, ``crosscheck_n``, ``limit_n``, ``stable_mu``, ``stable_t0``,
``qv_t``, ``qv_n``, ``chunk`` and the tolerances ``n_se``, ``rate_tol``,
``ks_alpha``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from ..phi import PhiSpec, parse_phi
from ..randfield import GridSpec

EXPERIMENTS = ("variance_check", "scaling_identity", "thm12", "thm13", "thm31", "thm32",
               "chaos_rates", "lemma21_cauchy", "nonlinear_rate_probe")
STATISTICAL = set(EXPERIMENTS) - {"nonlinear_rate_probe"}
MIN_N = 100

DEFAULT_PHI = {"variance_check": "constant:1", "scaling_identity": "constant:1; power:1,1,1",
               "thm13": "gaussian_bump", "thm32": "gaussian_bump",
               "nonlinear_rate_probe": "gaussian_bump"}
DEFAULT_COUPLING = {"i": "c=1", "ii": "beta=0.25", "iii": "beta=1"}

DEFAULTS = {
    "t": "1, 4, 16, 64", "n": "1000", "seed": "0", "workers": "1", "grid": "512x512",
    "y_pad": "6", "out": "shelab-out", "x": "0", "alpha": "1", "c_plus": "1", "c_minus": "1",
    "regime": "i", "orders": "1, 2", "epsilons": "0.2, 0.1, 0.05, 0.025",
    "integrand": "node", "sampler": "path", "crosscheck_n": "0", "limit_n": "0",
    "stable_mu": "1", "stable_t0": "1", "stable": "true", "qv_t": "", "qv_n": "200",
    "chunk": "250", "time_grading": "1", "space_grading": "1",
    "n_se": "3", "rate_tol": "0.1", "ks_alpha": "0.01",
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    phis: tuple
    ladder: tuple
    n: int
    seed: int
    workers: int
    grid: GridSpec
    y_pad: float
    out: str
    options: dict = field(default_factory=dict)

    @property
    def phi(self) -> PhiSpec:
        return self.phis[0]

    def opt(self, key: str):
        return self.options[key]

    def grid_for(self, t: float = 1.0, x: float = 0.0, R: float = 0.0, y_max: float | None = None
                 ) -> GridSpec:
        """Unit-interval grid with the truncation rule for ``(t, x, R)``."""
        y = (abs(x) + R) / math.sqrt(t) + self.y_pad if y_max is None else y_max
        return replace(self.grid, y_max=y)

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "phi": [p.as_dict() for p in self.phis],
                "t": list(self.ladder), "n": self.n, "seed": self.seed, "workers": self.workers,
                "grid": self.grid.as_dict(), "y_pad": self.y_pad, "out": self.out,
                "options": dict(self.options)}

    def digest(self) -> str:
        """Hash of everything that determines the sampled values (not workers or out)."""
        d = self.as_dict()
        d.pop("workers")
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_grid(text: str) -> tuple[int, int]:
    a, _, b = text.lower().partition("x")
    return int(a), int(b or a)


def parse_coupling(text: str) -> tuple[str, float]:
    key, _, val = text.partition("=")
    key = key.strip().lower()
    if key not in ("c", "beta"):
        raise ValueError(f"coupling must be 'c=<value>' or 'beta=<value>', got {text!r}")
    return key, float(val)


def coupled_R(coupling: tuple[str, float], t: float) -> float:
    kind, v = coupling
    return v * math.sqrt(t) if kind == "c" else t**v


def read_raw(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from exc
    raw = {}
    for sec in cp.sections():
        raw.update(cp[sec])
    return raw


def build(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a raw key-value mapping; raises :class:`ConfigError` listing all problems."""
    vals = dict(DEFAULTS)
    vals.update({k.strip().lower(): str(v).strip() for k, v in raw.items()})
    vals.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    errors: list[str] = []

    def get(key, conv, check=None, msg=""):
        try:
            v = conv(vals[key])
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"{key}: cannot parse {vals.get(key)!r} ({exc})")
            return None
        if check is not None and not check(v):
            errors.append(f"{key}: {msg} (got {vals[key]!r})")
        return v

    exp = vals.get("experiment", "").strip()
    if "experiment" not in raw:
        errors.append("experiment: missing")
    elif exp not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)} (got {exp!r})")
    phi_text = vals.get("phi") or DEFAULT_PHI.get(exp, "constant:1")
    phis = []
    for part in phi_text.split(";"):
        try:
            phis.append(parse_phi(part))
        except (ValueError, TypeError) as exc:
            errors.append(f"phi: cannot parse {part.strip()!r} ({exc})")
    ladder = get("t", _floats, lambda v: len(v) >= 1 and all(a > 0 for a in v)
                 and all(b > a for a, b in zip(v, v[1:])),
                 "ladder must be positive and strictly increasing")
    n = get("n", int, lambda v: v >= (MIN_N if exp in STATISTICAL else 2),
            f"need n >= {MIN_N} for statistical experiments")
    seed = get("seed", int, lambda v: v >= 0, "seed must be nonnegative")
    workers = get("workers", int, lambda v: v >= 1, "workers must be >= 1")
    nt_ns = get("grid", parse_grid, lambda v: v[0] >= 1 and v[1] >= 1, "grid sizes must be >= 1")
    y_pad = get("y_pad", float, lambda v: v > 0, "y_pad must be positive")
    opts = {}
    for key, conv in (("x", float), ("alpha", float), ("c_plus", float), ("c_minus", float),
                      ("stable_mu", float), ("stable_t0", float), ("n_se", float),
                      ("rate_tol", float), ("ks_alpha", float), ("time_grading", float),
                      ("space_grading", float)):
        opts[key] = get(key, conv)
    for key in ("crosscheck_n", "limit_n", "qv_n", "chunk"):
        opts[key] = get(key, int, lambda v: v >= 0, "must be nonnegative")
    if opts["chunk"] == 0:
        errors.append("chunk: must be positive")
    opts["orders"] = get("orders", lambda s: [int(v) for v in _floats(s)],
                         lambda v: len(v) > 0 and all(o >= 1 for o in v), "orders must be >= 1")
    opts["epsilons"] = get("epsilons", _floats,
                           lambda v: all(e > 0 for e in v) and all(b < a for a, b in zip(v, v[1:])),
                           "epsilons must be positive and strictly decreasing")
    opts["qv_t"] = get("qv_t", _floats, lambda v: all(b > a for a, b in zip(v, v[1:])),
                       "qv ladder must be strictly increasing")
    opts["regime"] = get("regime", str.strip, lambda v: v in ("i", "ii", "iii"),
                         "regime must be i, ii or iii")
    vals.setdefault("coupling", DEFAULT_COUPLING.get(opts["regime"] or "i", "c=1"))
    opts["coupling"] = get("coupling", parse_coupling,
                           lambda v: v[1] > 0, "coupling constant must be positive")
    opts["integrand"] = get("integrand", str.strip, lambda v: v in ("node", "subcell"),
                            "integrand must be node or subcell")
    opts["sampler"] = get("sampler", str.strip, lambda v: v in ("path", "exact"),
                          "sampler must be path or exact")
    opts["stable"] = get("stable", lambda s: s.strip().lower() in ("1", "true", "yes", "on"))
    if exp == "thm31" and opts.get("alpha") is not None and opts["alpha"] <= 0:
        errors.append("alpha: the space-average power limits need alpha > 0")
    if exp in ("thm13", "thm32") and phis:
        for p in phis:
            if p.l2_norm_sq is None:
                errors.append(f"phi: {p.label()} is not square integrable")
    if exp == "variance_check" and opts["sampler"] == "exact" \
            and any(p.kind != "constant" for p in phis):
        errors.append("sampler: exact sampling needs a constant phi")
    grid = None
    if nt_ns is not None:
        try:
            grid = GridSpec(nt_ns[0], nt_ns[1], 1.0, 1.0, opts["time_grading"] or 1.0,
                            opts["space_grading"] or 1.0)
        except (ValueError, MemoryError) as exc:
            errors.append(f"grid: {exc}")
    if errors:
        raise ConfigError(errors)
    if opts["limit_n"] == 0:
        opts["limit_n"] = n
    return ExperimentConfig(exp, tuple(phis), tuple(ladder), n, seed, workers, grid, y_pad,
                            vals["out"], opts)


def load(path: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        raw = read_raw(path)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return build(raw, overrides)
