"""JSON and CSV emission of inequality reports.

CSV columns are fixed so that files from different runs line up; terms an
inequality does not have are left empty.  Floats are written with ``repr``,
which round-trips exactly and keeps reruns byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .inequalities import InequalityReport

TERM_LABELS = ("main", "log_interior", "log_boundary", "boundary", "C")

COLUMNS = (
    ("name", "u", "alpha", "beta", "R", "constant", "main_constant", "lhs")
    + TERM_LABELS
    + ("rhs", "slack", "tolerance", "verdict", "err_lhs")
    + tuple(f"err_{k}" for k in TERM_LABELS)
    + ("scheme_hash", "seed")
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, int):
        return str(v)
    try:
        return repr(float(v))
    except (TypeError, ValueError):
        return str(v)


def report_row(rep: InequalityReport) -> dict:
    terms = dict(rep.rhs_terms)
    row = {
        "name": rep.name,
        "u": rep.u,
        "alpha": rep.params.get("alpha"),
        "beta": rep.params.get("beta"),
        "R": rep.params.get("R"),
        "constant": rep.constant,
        "main_constant": rep.extras.get("main_constant"),
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "tolerance": rep.tolerance,
        "verdict": rep.verdict,
        "err_lhs": rep.error_bars.get("lhs"),
        "scheme_hash": rep.scheme_hash,
        "seed": rep.seed,
    }
    for k in TERM_LABELS:
        row[k] = terms.get(k)
        row[f"err_{k}"] = rep.error_bars.get(k)
    unknown = set(terms) - set(TERM_LABELS)
    if unknown:
        raise ValueError(f"report has terms without a CSV column: {sorted(unknown)}")
    return {c: _fmt(row[c]) for c in COLUMNS}


def reports_to_csv(reports: Iterable[InequalityReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow(report_row(rep))
    return buf.getvalue()


def _clean(obj):
    # json cannot encode nan/inf portably
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def reports_to_json(reports: Sequence[InequalityReport], meta: dict = None) -> str:
    payload = {"reports": [_clean(r.to_dict()) for r in reports]}
    if meta:
        payload["meta"] = _clean(meta)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def reports_from_json(text: str) -> list:
    data = json.loads(text)
    return [InequalityReport.from_dict(d) for d in data["reports"]]


def emit_report(reports: Sequence[InequalityReport], fmt: str, path, meta: dict = None) -> Path:
    """Write ``reports`` to ``path`` as ``"json"`` or ``"csv"``."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    if fmt == "json":
        text = reports_to_json(reports, meta)
    elif fmt == "csv":
        text = reports_to_csv(reports)
    else:
        raise ValueError("format must be 'json' or 'csv'")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def rows_to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Plain table with the same float formatting, for traces and residual tables."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()
