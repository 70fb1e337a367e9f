"""Coincidence-count files.

CSV with header ``setting_a,setting_b,tau_ps,counts,integration_s``. Setting
tokens come from ``H V D A R L``; ``setting_b`` is empty for single-qubit
data. Process-tomography files add a trailing ``input`` column naming the
prepared input state.
"""

import csv
import math
from pathlib import Path

from ..errors import IngestionError
from ..qcore import KETS
from ..tomography import CoincidenceRecord, MeasurementSetting

REQUIRED = ("setting_a", "setting_b", "tau_ps", "counts", "integration_s")
OPTIONAL = ("input",)


def _fmt(x):
    return repr(float(x))


def export_counts(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with_input = any(r.setting.prep is not None for r in records)
    header = list(REQUIRED) + (["input"] if with_input else [])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            an = r.setting.analyzers
            row = [an[0], an[1] if len(an) > 1 else "", _fmt(r.setting.storage_time),
                   str(int(round(r.counts))), _fmt(r.setting.integration_time)]
            if with_input:
                row.append(r.setting.prep or "")
            w.writerow(row)
    return path


def ingest_counts(path):
    """Read and validate a counts file; every problem is reported with its line number."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestionError([f"{path}: {exc}"]) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError([f"{path}: empty file"]) from None
        missing = [c for c in REQUIRED if c not in header]
        unknown = [c for c in header if c not in REQUIRED + OPTIONAL]
        problems = []
        if missing:
            problems.append(f"line 1: missing columns {', '.join(missing)}")
        if unknown:
            problems.append(f"line 1: unknown columns {', '.join(unknown)}")
        if problems:
            raise IngestionError(problems)
        col = {c: header.index(c) for c in header}
        records, seen, n_analyzers = [], {}, set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                problems.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            get = lambda c: row[col[c]].strip() if c in col else ""  # noqa: E731
            errs = []
            a, b, prep = get("setting_a"), get("setting_b"), get("input") or None
            for name, tok in (("setting_a", a), ("setting_b", b), ("input", prep)):
                if tok and tok not in KETS:
                    errs.append(f"{name} {tok!r} is not one of {''.join(KETS)}")
            if not a:
                errs.append("setting_a is empty")
            tau = _number(get("tau_ps"), "tau_ps", errs)
            t_int = _number(get("integration_s"), "integration_s", errs)
            raw = get("counts")
            try:
                counts = int(raw)
            except ValueError:
                counts = None
                errs.append(f"counts {raw!r} is not an integer")
            if counts is not None and counts < 0:
                errs.append(f"counts {counts} is negative")
            if tau is not None and tau < 0:
                errs.append(f"tau_ps {tau} is negative")
            if t_int is not None and not t_int > 0:
                errs.append(f"integration_s {t_int} must be positive")
            if errs:
                problems.extend(f"line {lineno}: {e}" for e in errs)
                continue
            key = (a, b, prep, tau)
            if key in seen:
                problems.append(f"line {lineno}: duplicate setting {a}{b or ''}"
                                f"{' input ' + prep if prep else ''} at tau {tau} ps (first on line {seen[key]})")
                continue
            seen[key] = lineno
            analyzers = (a, b) if b else (a,)
            n_analyzers.add(len(analyzers))
            records.append(CoincidenceRecord(MeasurementSetting(analyzers, tau, t_int, prep), counts))
        if len(n_analyzers) > 1:
            problems.append("file mixes single-qubit and two-qubit rows")
        if problems:
            raise IngestionError(problems)
    if not records:
        raise IngestionError([f"{path}: no data rows"])
    return records


def _number(text, name, errs):
    try:
        v = float(text)
    except ValueError:
        errs.append(f"{name} {text!r} is not a number")
        return None
    if not math.isfinite(v):
        errs.append(f"{name} {text!r} is not finite")
        return None
    return v


def group_by_tau(records):
    """``{tau: [records...]}`` preserving file order within each delay."""
    groups = {}
    for r in records:
        groups.setdefault(r.setting.storage_time, []).append(r)
    return dict(sorted(groups.items()))
