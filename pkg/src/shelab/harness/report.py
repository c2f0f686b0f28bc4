"""CSV tables and Markdown summaries from persisted result records."""

from __future__ import annotations

import csv
import io
import json
import os

from .verdicts import decide, label

CSV_COLUMNS = ["experiment", "cell", "label", "t", "R", "N", "mean", "sd", "SE", "verdict"]


class RecordError(ValueError):
    pass


def load_record(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
    except OSError as exc:
        raise RecordError(f"cannot read record {path}: {exc}") from exc
    except ValueError as exc:
        raise RecordError(f"corrupt record {path}: {exc}") from exc
    if not isinstance(rec, dict) or "experiment" not in rec:
        raise RecordError(f"{path} is not a result record")
    rec.setdefault("cells", [])
    rec.setdefault("verdicts", [])
    return rec


def recheck(rec: dict) -> list[str]:
    """Names of verdicts whose stored outcome disagrees with their stored inputs."""
    bad = []
    for v in rec.get("verdicts", []):
        if decide(v["kind"], v["fields"]) != v["passed"]:
            bad.append(v["name"])
    return bad


def _cell_verdict(rec: dict, idx: int) -> str:
    vs = [v for v in rec["verdicts"] if v.get("cell") == idx]
    if rec.get("exploratory"):
        return "EXPLORATORY"
    if not vs:
        return ""
    if any(v["passed"] is False for v in vs):
        return "FAIL"
    if all(v["passed"] is None for v in vs):
        return "INFO"
    return "PASS"


def _fmt(x):
    return "" if x is None else (f"{x:.10g}" if isinstance(x, float) else str(x))


def csv_table(rec: dict) -> str:
    """RFC-4180 CSV, one row per ladder cell."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for i, c in enumerate(rec["cells"]):
        w.writerow([rec["experiment"], i, c.get("label", ""), _fmt(c.get("t")), _fmt(c.get("R")),
                    c.get("n"), _fmt(c.get("mean")), _fmt(c.get("sd")), _fmt(c.get("stderr")),
                    _cell_verdict(rec, i)])
    return buf.getvalue()


def verdicts_csv(rec: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["experiment", "verdict", "name", "kind", "cell", "value", "oracle", "note"])
    for v in rec["verdicts"]:
        f = v["fields"]
        w.writerow([rec["experiment"], label(v), v["name"], v["kind"], _fmt(v.get("cell")),
                    _fmt(f.get("value", f.get("p_value", f.get("max_abs_gap")))),
                    _fmt(f.get("oracle", f.get("alpha", f.get("bound")))), v.get("note", "")])
    return buf.getvalue()


def markdown(rec: dict) -> str:
    title = rec.get("title", rec["experiment"])
    lines = [f"# {rec['experiment']}: {title}", ""]
    if rec.get("exploratory"):
        lines += ["**EXPLORATORY**: fitted exponents are recorded without a pass/fail verdict.", ""]
    lines += [f"- config digest: `{rec.get('digest', '')}`",
              f"- seed: {rec.get('config', {}).get('seed', '')}",
              f"- complete: {rec.get('complete', True)}",
              f"- wall clock: {rec.get('wall_clock', 0.0):.1f} s", ""]
    if rec.get("errors"):
        lines += ["## Errors", ""] + [f"- {e}" for e in rec["errors"]] + [""]
    lines += ["## Verdicts", "", "| verdict | check | kind | value | reference | note |",
              "|---|---|---|---|---|---|"]
    for v in rec["verdicts"]:
        f = v["fields"]
        val = f.get("value", f.get("p_value", f.get("max_abs_gap", f.get("values"))))
        ref = f.get("oracle", f.get("alpha", f.get("bound")))
        tag = label(v)
        if tag == "FAIL":
            tag = "**FAIL**"
        lines.append(f"| {tag} | {v['name']} | {v['kind']} | {_md(val)} | {_md(ref)} "
                     f"| {v.get('note', '')} |")
    lines += ["", "## Cells", "", "| # | label | t | R | N | mean | sd | SE | verdict |",
              "|---|---|---|---|---|---|---|---|---|"]
    for i, c in enumerate(rec["cells"]):
        cv = _cell_verdict(rec, i)
        cv = "**FAIL**" if cv == "FAIL" else cv
        lines.append(f"| {i} | {c.get('label', '')} | {_md(c.get('t'))} | {_md(c.get('R'))} "
                     f"| {c.get('n')} | {_md(c.get('mean'))} | {_md(c.get('sd'))} "
                     f"| {_md(c.get('stderr'))} | {cv} |")
    return "\n".join(lines) + "\n"


def _md(x):
    if isinstance(x, list):
        return ", ".join(_md(v) for v in x)
    return "" if x is None else (f"{x:.5g}" if isinstance(x, float) else str(x))


def any_failed(rec: dict) -> bool:
    if not rec.get("complete", True):
        return True
    return any(v["passed"] is False for v in rec["verdicts"])


def write_outputs(rec: dict, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, text in (("cells.csv", csv_table(rec)), ("verdicts.csv", verdicts_csv(rec)),
                       ("summary.md", markdown(rec))):
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = p
    return paths
