"""Experiment reports and their JSON / CSV serialization."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field


@dataclass
class Table:
    columns: list
    rows: list

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row {row!r} does not match columns {self.columns!r}")


@dataclass
class Report:
    config: dict
    kind: str
    results: dict = field(default_factory=dict)  # scalar name -> value
    tables: dict = field(default_factory=dict)  # name -> Table
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        return _encode(out)

    @classmethod
    def from_dict(cls, d):
        d = _decode(d)
        tables = {k: Table(list(v["columns"]), [list(r) for r in v["rows"]])
                  for k, v in d.get("tables", {}).items()}
        return cls(d["config"], d["kind"], d.get("results", {}), tables,
                   d.get("diagnostics", {}), list(d.get("warnings", [])))


# JSON has no inf/nan; they travel as strings and come back as floats.
_SPECIAL = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _encode(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _encode(obj.item())
    return obj


def _decode(obj):
    if isinstance(obj, str) and obj in _SPECIAL:
        return _SPECIAL[obj]
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)


def loads(text):
    return Report.from_dict(json.loads(text))


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return "" if v is None else str(v)


def write_csv(table, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def emit_report(report, out_dir, fmt="json", name="report"):
    """Write ``report`` to ``out_dir``; returns the list of written paths.

    ``json`` writes the whole report; ``csv`` writes one file per table,
    named ``<name>_<table>.csv``, with the table's fixed column order.
    """
    if fmt not in ("json", "csv", "both"):
        raise ValueError("format must be json, csv or both")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(report))
            fh.write("\n")
        written.append(path)
    if fmt in ("csv", "both"):
        for key, table in report.tables.items():
            path = os.path.join(out_dir, f"{name}_{key}.csv")
            write_csv(table, path)
            written.append(path)
    return written
