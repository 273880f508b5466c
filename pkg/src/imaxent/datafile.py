"""Reading observations from text files."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

__all__ = ["DataFileError", "read_observations"]


class DataFileError(ValueError):
    """Malformed data file; ``lines`` holds the offending 1-based line numbers."""

    def __init__(self, message: str, lines=()):
        super().__init__(message)
        self.lines = list(lines)


def _parse(token: str):
    try:
        x = float(token)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def _report(path, bad) -> DataFileError:
    shown = ", ".join(str(i) for i in bad[:20]) + (" ..." if len(bad) > 20 else "")
    return DataFileError(f"{path}: non-numeric value on line(s) {shown}", bad)


def read_observations(path, column: str | int | None = None) -> np.ndarray:
    """One value per line, or a CSV with a header when ``column`` is given.

    ``column`` is a header name or a 0-based index. Blank lines are
    skipped; any other non-numeric row is an error listing line numbers.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    values, bad = [], []
    if column is None:
        for i, line in enumerate(text.splitlines(), start=1):
            tok = line.strip()
            if not tok:
                continue
            x = _parse(tok)
            if x is None:
                bad.append(i)
            else:
                values.append(x)
    else:
        rows = list(csv.reader(text.splitlines()))
        if not rows:
            raise DataFileError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        if isinstance(column, str) and column in header:
            idx = header.index(column)
        else:
            try:
                idx = int(column)
            except ValueError:
                raise DataFileError(f"{path}: no column {column!r}; header is {header}") from None
            if not 0 <= idx < len(header):
                raise DataFileError(f"{path}: column index {idx} out of range for {len(header)} columns")
        for i, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            x = _parse(row[idx].strip()) if idx < len(row) else None
            if x is None:
                bad.append(i)
            else:
                values.append(x)
    if bad:
        raise _report(path, bad)
    if not values:
        raise DataFileError(f"{path}: no observations")
    return np.array(values, dtype=float)
