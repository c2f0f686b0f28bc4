"""Command line: ``shelab run|report|oracle|selftest``.

Exit codes: 0 all verdicts pass, 1 any verdict fails (or the run is
incomplete), 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import ConfigError, OracleCache, load, passed, run, save_record
from .report import RecordError, any_failed, load_record, markdown, recheck, write_outputs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def default_cache_path() -> str:
    return os.environ.get("SHELAB_CACHE") or os.path.join(
        os.path.expanduser("~"), ".cache", "shelab", "oracles.json")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shelab", description=__doc__.splitlines()[0])
    p.add_argument("--cache", default=None, help="oracle cache file (default $SHELAB_CACHE)")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--grid", help="n_time x n_space, e.g. 256x256")
    r.add_argument("--out", help="output directory")
    rp = sub.add_parser("report", help="summarize a result record")
    rp.add_argument("record")
    rp.add_argument("--out", help="directory for CSV and Markdown (default: next to record)")
    o = sub.add_parser("oracle", help="evaluate a cached oracle, params as key=value")
    o.add_argument("name")
    o.add_argument("params", nargs="*")
    o.add_argument("--tol", type=float, default=1e-9)
    sub.add_parser("selftest", help="fast internal consistency checks")
    return p


def _parse_params(items):
    out = {}
    for it in items:
        k, sep, v = it.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {it!r}")
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


def cmd_run(args, cache) -> int:
    overrides = {"seed": args.seed, "workers": args.workers, "grid": args.grid, "out": args.out}
    try:
        cfg = load(args.config, overrides)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    rec = run(cfg, cache)
    path = save_record(rec, cfg.out)
    print(markdown(rec))
    print(f"record written to {path}")
    return EXIT_OK if passed(rec) else EXIT_FAIL


def cmd_report(args) -> int:
    try:
        rec = load_record(args.record)
    except RecordError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.path.dirname(os.path.abspath(args.record))
    write_outputs(rec, out)
    print(markdown(rec))
    bad = recheck(rec)
    if bad:
        print("verdicts inconsistent with their stored inputs: " + ", ".join(bad), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_FAIL if any_failed(rec) else EXIT_OK


def cmd_oracle(args, cache) -> int:
    try:
        params = _parse_params(args.params)
        value, hit = cache.get(args.name, params, args.tol)
    except (KeyError, ValueError, TypeError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"op": args.name, "params": params, "tol": args.tol, "value": value,
                      "cache_hit": hit}))
    return EXIT_OK


def selftest() -> list[tuple[str, bool, str]]:
    """Quick oracle cross-checks and a miniature end-to-end run."""
    from .. import local_time, oracles, stattest
    from ..phi import PhiSpec
    from .config import build

    out = []

    def check(name, ok, detail):
        out.append((name, bool(ok), detail))

    a = local_time.expected_local_time(1.0, "closed")
    b = local_time.expected_local_time(1.0, "substituted")
    check("E L closed form vs quadrature", abs(a - b) < 1e-9, f"{a:.12f} vs {b:.12f}")
    for n in (1, 2, 3):
        a, b = oracles.chaos_variance(n, 4.0), oracles.chaos_variance_quadrature(n, 4.0)
        check(f"chaos {n} variance closed form vs quadrature", abs(a - b) < 1e-8 * a,
              f"{a:.10g} vs {b:.10g}")
    a = oracles.heat_sq_variance(PhiSpec.power(0.0, 1.0, 1.0), 4.0)
    b = math.sqrt(4.0 / math.pi)
    check("variance quadrature vs sqrt(t/pi)", abs(a - b) < 1e-8, f"{a:.10g} vs {b:.10g}")
    z = stattest.ecf(stattest.McBatch([0.3, -1.2, 2.0]), [0.0])[0]
    check("ecf at lambda = 0", z == 1.0, str(z))
    cfg = build({"experiment": "variance_check", "t": "1, 4", "n": "4000", "grid": "64x64",
                 "sampler": "exact", "seed": "7"})
    rec = run(cfg)
    check("miniature variance_check run", passed(rec),
          ", ".join(f"{v['name']}={v['passed']}" for v in rec["verdicts"]))
    return out


def cmd_selftest() -> int:
    results = selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "selftest":
        return cmd_selftest()
    if args.cmd == "report":
        return cmd_report(args)
    cache = OracleCache(args.cache or default_cache_path())
    if args.cmd == "run":
        return cmd_run(args, cache)
    return cmd_oracle(args, cache)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
