"""Small shared helpers: CSV output with fixed number formatting."""
from __future__ import annotations

import csv
import os

import numpy as np


def fmt(x) -> str:
    """Locale-independent 17-significant-digit rendering; strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header, rows, comments=()) -> None:
    """Write ``rows`` under ``header``; ``comments`` become leading ``#`` lines."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
