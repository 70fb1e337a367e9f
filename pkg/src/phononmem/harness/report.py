"""Writing run reports as JSON documents and flat CSV tables."""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from ..errors import ValidationError


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_json(report):
    return json.dumps(_clean(report.to_dict()), indent=2, sort_keys=True) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.per_tau:
        w.writerow([_cell(row.get(c)) for c in report.columns])
    return buf.getvalue()


def _stem(out):
    out = Path(out)
    if out.suffix in (".json", ".csv"):
        out = out.with_suffix("")
    if out.is_dir():
        out = out / "report"
    return out


def emit_report(report, out, fmt="both"):
    """Write ``<out>.json`` and/or ``<out>.csv``; returns the written paths."""
    if fmt not in ("json", "csv", "both"):
        raise ValidationError(f"unknown report format {fmt!r}")
    stem = _stem(out)
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt in ("json", "both"):
            p = stem.with_name(stem.name + ".json")
            p.write_text(report_json(report))
            written.append(p)
        if fmt in ("csv", "both"):
            p = stem.with_name(stem.name + ".csv")
            p.write_text(report_csv(report))
            written.append(p)
    except OSError as exc:
        raise ValidationError(f"cannot write report to {stem}: {exc}") from None
    return written
