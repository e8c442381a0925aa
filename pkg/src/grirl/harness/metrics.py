"""metrics.csv reading and writing.

Floats are written with ``repr`` so the text never depends on the locale and
reparses to the identical value. NaN is written as an empty field.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from grirl.gri import METRICS_COLUMNS, MetricsRow

HEADER = ",".join(METRICS_COLUMNS)
_INT_COLUMNS = {"env_steps", "cumulative_demo_draws"}


class MetricsFormatError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


def format_value(value) -> str:
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def format_row(row: MetricsRow) -> str:
    return ",".join(format_value(getattr(row, c)) for c in METRICS_COLUMNS)


class MetricsWriter:
    """Appends rows to metrics.csv, flushing each one so partial runs stay readable."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._fh.write(HEADER + "\n")
        self._fh.flush()
        self._last_step: int | None = None

    def write(self, row: MetricsRow) -> None:
        if self._last_step is not None and row.env_steps <= self._last_step:
            raise ValueError(f"env_steps must increase: {row.env_steps} after {self._last_step}")
        self._last_step = row.env_steps
        self._fh.write(format_row(row) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_metrics(path, rows) -> None:
    with MetricsWriter(path) as w:
        for row in rows:
            w.write(row)


def read_metrics(path) -> list[MetricsRow]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MetricsFormatError(path, 0, f"cannot read: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise MetricsFormatError(path, 1, f"expected header {HEADER!r}")
    rows: list[MetricsRow] = []
    for lineno, fields in enumerate(csv.reader(lines[1:]), 2):
        if not fields:
            continue
        if len(fields) != len(METRICS_COLUMNS):
            raise MetricsFormatError(path, lineno, f"expected {len(METRICS_COLUMNS)} fields, got {len(fields)}")
        values = {}
        for name, text_value in zip(METRICS_COLUMNS, fields):
            try:
                if name in _INT_COLUMNS:
                    values[name] = int(text_value)
                else:
                    values[name] = float(text_value) if text_value else math.nan
            except ValueError:
                raise MetricsFormatError(path, lineno, f"bad {name} value {text_value!r}") from None
        row = MetricsRow(**values)
        if rows and row.env_steps <= rows[-1].env_steps:
            raise MetricsFormatError(path, lineno, "env_steps not strictly increasing")
        rows.append(row)
    return rows
