"""Per-episode metrics CSV, flushed after every row."""
from __future__ import annotations

import math

METRIC_COLUMNS = ("episode", "return", "tracking_error", "td_loss", "disc_loss",
                  "constraint_violation", "kl")


def _fmt(value):
    if isinstance(value, int):
        return str(value)
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return f"{float(value):.10g}"


class MetricsWriter:
    """Single-owner CSV writer; usable as a context manager."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(METRIC_COLUMNS) + "\n")
        self._fh.flush()

    def write(self, **row):
        unknown = set(row) - set(METRIC_COLUMNS)
        if unknown:
            raise KeyError(f"unknown metric columns {sorted(unknown)}")
        self._fh.write(",".join(_fmt(row.get(c)) for c in METRIC_COLUMNS) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    """Rows of a metrics CSV as dicts of floats."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        return [dict(zip(header, map(float, line.strip().split(",")))) for line in fh if line.strip()]
