"""CSV and JSON output for simulation summaries, bound reports and claims."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from .bounds import BoundReport
from .simulation import SimulationSummary
from .verify import ClaimResult

SUMMARY_COLUMNS = (
    "n",
    "mechanism",
    "trials",
    "sw_pp_mean",
    "sw_pp_se",
    "sw_opt_mean",
    "sw_opt_se",
    "ratio",
    "ratio_se",
    "revenue_mean",
)
BOUND_COLUMNS = ("claim", "passed", "max_violation", "slack", "notes")
CLAIM_COLUMNS = ("claim", "passed")


def fmt(x) -> str:
    """Numbers with 10 significant digits; other values via str()."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.10g" % x
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return None
        return float("%.10g" % x)
    return x


def _record(r):
    if isinstance(r, SimulationSummary):
        return r.to_dict()
    if isinstance(r, (BoundReport, ClaimResult)):
        return r.to_dict()
    raise TypeError(f"cannot report {type(r).__name__}")


def _columns(results):
    kinds = {type(r) for r in results}
    if len(kinds) != 1:
        raise TypeError("a CSV report holds one kind of result")
    kind = kinds.pop()
    if kind is SimulationSummary:
        return SUMMARY_COLUMNS
    if kind is BoundReport:
        return BOUND_COLUMNS
    if kind is ClaimResult:
        return CLAIM_COLUMNS
    raise TypeError(f"cannot report {kind.__name__}")


def render(results: Sequence, fmt_name: str = "csv") -> str:
    results = list(results)
    if not results:
        raise ValueError("nothing to report")
    if fmt_name == "json":
        return json.dumps(_jsonable([_record(r) for r in results]), indent=2) + "\n"
    if fmt_name != "csv":
        raise ValueError(f"unknown format {fmt_name!r}; use csv or json")
    cols = _columns(results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in results:
        d = _record(r)
        w.writerow([fmt(d[c]) for c in cols])
    return buf.getvalue()


def emit_report(results: Sequence, fmt_name: str = "csv", path: str = "-") -> str:
    """Write ``results`` to ``path`` ('-' for stdout) and return the text."""
    text = render(results, fmt_name)
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
