"""CSV and JSON writers/readers for time series, sensor traces and metrics reports.

Time-series CSV: one header row, then one row per 100 Hz log tick. Columns are
``STATE_COLUMNS`` followed by ``HORN_COLUMNS`` for each horn as ``<horn>_<col>``.
Numbers use 9 significant digits (``%.9g``); flags are written as 0/1.

Sensor CSV: ``t, horn_id, code, resistance_ohm, filtered_ohm, in_event``, rows
ordered by time and then by horn order.

Metrics JSON: a single object validated by ``REPORT_SCHEMA`` and tagged with
``schema_version``. Non-finite numbers are written as ``null``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import jsonschema
import numpy as np

SCHEMA_VERSION = "1.0"
SENSOR_COLUMNS = ["t", "horn_id", "code", "resistance_ohm", "filtered_ohm", "in_event"]

_num_or_null = {"type": ["number", "null"]}
_num_list = {"type": "array", "items": _num_or_null}

REPORT_SCHEMA: dict = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "MetricsReport",
    "type": "object",
    "required": ["schema_version", "scenario", "configuration", "seed", "pitch_rmse_deg",
                 "mean_pitch_rmse_deg", "contact_delay_ms", "mean_contact_delay_ms",
                 "collision_count", "stability", "energy_absorbed_j"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": ["TouchAndGo", "Pushing", "Scripted"]},
        "configuration": {"enum": ["FullSoft", "HalfSoft", "FullHard"]},
        "seed": {"type": "integer"},
        "pitch_rmse_deg": _num_list,
        "mean_pitch_rmse_deg": _num_or_null,
        "contact_delay_ms": _num_list,
        "mean_contact_delay_ms": _num_or_null,
        "pitch_excursion_deg": _num_list,
        "pitch_rate_signature": {"type": "array", "items": {"type": "boolean"}},
        "collision_count": {"type": "integer", "minimum": 0},
        "approaches_started": {"type": "integer", "minimum": 0},
        "impact_count": {"type": "integer", "minimum": 0},
        "sensed_impact_count": {"type": "integer", "minimum": 0},
        "stability": {
            "type": "object",
            "required": ["verdict"],
            "properties": {
                "verdict": {"enum": ["Stable", "Unstable", "NotEvaluated"]},
                "onset_t": _num_or_null,
                "theta_min_deg": _num_or_null,
                "theta_max_deg": _num_or_null,
                "mean_normal_force_n": _num_or_null,
                "span": {"type": ["array", "null"], "items": {"type": "number"}},
                "reason": {"type": "string"},
            },
        },
        "release_disengage_s": _num_or_null,
        "energy_absorbed_j": _num_list,
        "diverged_at": _num_or_null,
        "failed_horns": {"type": "object", "additionalProperties": {"type": "integer"}},
        "events": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["onset_t", "peak_t", "peak_value", "release_t"],
                    "properties": {k: {"type": "number"} for k in ("onset_t", "peak_t", "peak_value",
                                                                     "release_t")},
                },
            },
        },
        "thresholds_ohm": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}


class ExportError(OSError):
    """I/O failure while reading or writing an artifact; carries the offending path."""

    def __init__(self, path, err):
        super().__init__(f"{path}: {err}")
        self.path = str(path)


def fmt(v: Any) -> str:
    """Format a scalar at 9 significant digits (booleans as 0/1)."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise ExportError(path, err) from err
    return path


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ExportError(path, err) from err


def series_to_csv(series) -> str:
    names = series.column_names()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    cols = [series.columns[n] for n in names]
    for row in zip(*cols):
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_series_csv(series, path) -> Path:
    return write_text(path, series_to_csv(series))


def read_series_csv(path) -> tuple[list, dict]:
    """Return (header, {column: float array}) from a time-series CSV."""
    rows = list(csv.reader(io.StringIO(_read_text(path))))
    if not rows:
        raise ValueError(f"{path}: missing header row")
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, {name: data[:, i] for i, name in enumerate(header)}


def sensor_rows(sensors: Mapping[str, Sequence]) -> list:
    rows = [(s.t, i, s) for i, h in enumerate(sensors) for s in sensors[h]]
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def sensors_to_csv(sensors: Mapping[str, Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SENSOR_COLUMNS)
    for s in sensor_rows(sensors):
        w.writerow([fmt(s.t), s.horn_id, fmt(int(s.code)), fmt(s.resistance), fmt(s.filtered),
                    fmt(bool(s.in_event))])
    return buf.getvalue()


def write_sensor_csv(sensors: Mapping[str, Sequence], path) -> Path:
    return write_text(path, sensors_to_csv(sensors))


def read_sensor_csv(path) -> list:
    rows = list(csv.DictReader(io.StringIO(_read_text(path))))
    return [dict(t=float(r["t"]), horn_id=r["horn_id"], code=int(r["code"]),
                 resistance_ohm=float(r["resistance_ohm"]), filtered_ohm=float(r["filtered_ohm"]),
                 in_event=r["in_event"] == "1") for r in rows]


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(fmt(v)) if math.isfinite(v) else None
    return obj


def report_to_json(doc: Mapping) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def validate_report(doc: Mapping) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` breaks the report schema."""
    jsonschema.validate(_clean(doc), REPORT_SCHEMA)


def write_json(doc: Mapping, path) -> Path:
    return write_text(path, report_to_json(doc))


def write_report_json(doc: Mapping, path) -> Path:
    validate_report(doc)
    return write_json(doc, path)


def read_json(path) -> Any:
    return json.loads(_read_text(path))


def export(series, report: Optional[Mapping], out_dir, stem: str = "run") -> dict:
    """Write ``<stem>_timeseries.csv``, ``<stem>_sensors.csv`` and ``<stem>_metrics.json``."""
    out = Path(out_dir)
    paths = {"timeseries": write_series_csv(series, out / f"{stem}_timeseries.csv"),
             "sensors": write_sensor_csv(series.sensors, out / f"{stem}_sensors.csv")}
    if report is not None:
        paths["metrics"] = write_report_json(report, out / f"{stem}_metrics.json")
    return paths


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else ("" if v is None else fmt(v)) for v in r])
    return buf.getvalue()
