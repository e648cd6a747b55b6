"""CSV input and output.

Series files have a ``time,value`` header. Matrix files (fields, kernel
tables, autocovariances) have a blank corner cell, column coordinates in
the first row and row coordinates in the first column. Floats are written
with 17 significant digits so files round-trip exactly; missing values are
empty cells.
"""
from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Tuple

import numpy as np

from .acv import AcvField
from .errors import DataError
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .transform import TimeSeries

log = logging.getLogger(__name__)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else "%.17g" % x


def _parse(cell: str, path, line: int) -> float:
    cell = cell.strip()
    if cell == "":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"{path}:{line}: not a number: {cell!r}") from None


def read_series(path) -> Tuple[TimeSeries, int]:
    """Read a ``time,value`` CSV; returns the series and the number of dropped rows.

    Rows whose value cell is empty are treated as missing and dropped.
    Times must be finite and strictly increasing over the kept rows.
    """
    times, values, lines = [], [], []
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["time", "value"]:
            raise DataError(f"{path}:1: expected header 'time,value'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line}: expected 2 columns, found {len(row)}")
            t = _parse(row[0], path, line)
            v = _parse(row[1], path, line)
            if not math.isfinite(t):
                raise DataError(f"{path}:{line}: time must be a finite number")
            if math.isnan(v) and row[1].strip() == "":
                dropped += 1
                continue
            if not math.isfinite(v):
                raise DataError(f"{path}:{line}: value must be finite")
            times.append(t)
            values.append(v)
            lines.append(line)
    if len(times) < 2:
        raise DataError(f"{path}: need at least two observations, found {len(times)}")
    t = np.asarray(times)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        rows = ", ".join(str(lines[k + 1]) for k in bad[:10])
        more = "" if bad.size <= 10 else f" and {bad.size - 10} more"
        raise DataError(f"{path}: times not strictly increasing at line(s) {rows}{more}")
    return TimeSeries(t, np.asarray(values)), dropped


def ingest_csv(path) -> TimeSeries:
    """Validated series from a ``time,value`` CSV; missing values are dropped and logged."""
    series, dropped = read_series(path)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", path, dropped)
    return series


def write_series(path, series: TimeSeries) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time,value\n")
        for t, v in zip(series.times, series.values):
            fh.write(f"{_fmt(t)},{_fmt(v)}\n")


def write_matrix(target, rows, cols, data) -> None:
    """Write a matrix CSV to a path or an open text stream."""
    data = np.asarray(data, dtype=float)
    lines = ["," + ",".join(_fmt(c) for c in cols) + "\n"]
    lines += [_fmt(r) + "," + ",".join(_fmt(x) for x in line) + "\n" for r, line in zip(rows, data)]
    if hasattr(target, "write"):
        target.writelines(lines)
        return
    with open(target, "w", newline="") as fh:
        fh.writelines(lines)


def read_matrix(path):
    """Returns ``(row_coords, col_coords, data)`` with NaN for empty cells."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise DataError(f"{path}:1: expected a header row of column coordinates")
        cols = [_parse(c, path, 1) for c in header[1:]]
        rows, data = [], []
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} cells, found {len(row)}")
            rows.append(_parse(row[0], path, line))
            data.append([_parse(c, path, line) for c in row[1:]])
    if any(math.isnan(c) for c in cols) or any(math.isnan(r) for r in rows):
        raise DataError(f"{path}: coordinates must not be empty")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows), np.asarray(cols), np.asarray(data, dtype=float)


def write_field(path, field: ScaleTimeField) -> None:
    write_matrix(path, field.grid.scales, field.locations.locations, field.data)


def read_field(path, role=Role.PERIODOGRAM) -> ScaleTimeField:
    """Load a field written by :func:`write_field`; locations are absolute times."""
    scales, locs, data = read_matrix(path)
    if np.any(np.isnan(data)):
        raise DataError(f"{path}: field contains empty cells")
    try:
        grid = ScaleGrid(scales)
        locations = LocationGrid(locs, origin=float(locs[0]), span=float(locs[-1] - locs[0]))
        return ScaleTimeField(Role(role), grid, locations, data)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_acv(path, acv: AcvField) -> None:
    write_matrix(path, acv.locations.locations, acv.lags, acv.data)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
