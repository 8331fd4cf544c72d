"""CSV and JSON emitters; the column lists are the versioned file schemas."""
from __future__ import annotations

import csv
import io
import json
import math

RESULTS_COLUMNS = ("protocol", "episode", "way", "shot", "query_shot", "method",
                   "accuracy", "entropy_before", "entropy_after")
HARDNESS_COLUMNS = ("protocol", "episode", "way", "shot", "query_shot", "method",
                    "accuracy", "omega")
SWEEP_COLUMNS = ("axis", "value", "method", "n", "mean", "std", "ci95")
LOSS_COLUMNS = ("epoch", "lr", "loss")
SCHEMA_VERSION = 1


def fmt(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(columns, rows))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
